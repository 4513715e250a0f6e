"""Gel'fand-Levitan-Marchenko inversion: scattering data to transformation kernels and coefficients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .background import BackgroundOperator
from .errors import (
    ConsistencyFailure,
    IllConditioned,
    InvalidInput,
    NotPositive,
    TailTruncationTooLarge,
)
from .jost import TransformationKernel
from .scattering import ScatteringData, _dirichlet_poly, background_table, reflection_fourier


@dataclass
class GLMKernel:
    """``F_side(l, m) = F_refl + F_bound`` for ``l0 <= l, m <= l1``.

    The bound-state part is kept in factored form ``V diag(gamma) V^T`` so
    the solver can treat it exactly.
    """

    side: int
    l0: int
    F_refl: np.ndarray
    V: np.ndarray  # (size, #bound states): hat psi_{q,side}(rho_k, l)
    gamma: np.ndarray
    imag_residual: float
    presym_residual: float
    nodes_per_band: int

    @property
    def l1(self) -> int:
        return self.l0 + self.F_refl.shape[0] - 1

    @property
    def F_bound(self) -> np.ndarray:
        return (self.V * self.gamma) @ self.V.T

    @property
    def F(self) -> np.ndarray:
        return self.F_refl + self.F_bound

    def __call__(self, l: int, m: int) -> float:
        return float(self.F[l - self.l0, m - self.l0])

    def block(self, n: int, depth: int) -> Tuple[np.ndarray, np.ndarray]:
        """``(F~_n, V_n)`` on ``j = 0..depth`` with index ``n + side*j``."""
        idx = n + self.side * np.arange(depth + 1) - self.l0
        if idx.min() < 0 or idx.max() >= self.F_refl.shape[0]:
            raise InvalidInput("GLM block for n=%d, depth=%d leaves the assembled range" % (n, depth))
        return self.F_refl[np.ix_(idx, idx)], self.V[idx]

    def envelope(self) -> Tuple[np.ndarray, np.ndarray]:
        """``max |F(l, m)|`` over anti-diagonals ``l + m = s``."""
        F = self.F
        N = F.shape[0]
        s = np.add.outer(np.arange(N), np.arange(N))
        vals = np.array([np.max(np.abs(F[s == k])) for k in range(2 * N - 1)])
        return 2 * self.l0 + np.arange(2 * N - 1), vals


def bound_vectors(op_q: BackgroundOperator, rhos, side: int, l0: int, l1: int) -> np.ndarray:
    """``hat psi_{q,side}(rho, l) = prod_{sigma_j = side}(rho - mu_j) psi_{q,side}(rho, l)``."""
    out = np.zeros((l1 - l0 + 1, len(rhos)))
    poly = _dirichlet_poly(op_q, side)
    for k, rho in enumerate(rhos):
        tab = background_table(op_q, np.array([rho]), np.array([1]), side, l0, l1)[0].real
        out[:, k] = npoly.polyval(rho, poly) * tab
    return out


def assemble_F(data: ScatteringData, op_q: Optional[BackgroundOperator], side: int, l0: int, l1: int) -> GLMKernel:
    """Assemble ``F_side`` on the index square ``[l0, l1]``."""
    op_q = data.background() if op_q is None else op_q
    Fr, imag = reflection_fourier(data, op_q, side, l0, l1)
    pre = float(np.max(np.abs(Fr - Fr.T), initial=0.0))
    Fr = 0.5 * (Fr + Fr.T)
    rhos = [b.rho for b in data.bound_states]
    gam = np.array([b.gamma_plus if side > 0 else b.gamma_minus for b in data.bound_states], float)
    V = bound_vectors(op_q, rhos, side, l0, l1)
    return GLMKernel(side, l0, Fr, V, gam, imag, pre, data.nodes_per_band)


def check_positivity(kernel: GLMKernel, n: int, depth: int) -> float:
    """Smallest eigenvalue of ``1 + F_n`` on the truncated space."""
    Ft, V = kernel.block(n, depth)
    A = np.eye(depth + 1) + Ft + (V * kernel.gamma) @ V.T
    return float(np.linalg.eigvalsh(A)[0])


def quadratic_form_gap(kernel: GLMKernel, n: int, depth: int, samples: int = 20, seed: int = 0) -> float:
    """``min_f (<f,(1+F_n)f> - sum_k gamma_k |hat f(rho_k)|^2) / max(1, <f,(1+F_n)f>)``.

    ``F_n`` is the assembled total kernel and ``f`` runs over random unit
    vectors; a negative value means the reflection part is not positive.
    """
    rng = np.random.default_rng(seed)
    idx = n + kernel.side * np.arange(depth + 1) - kernel.l0
    F = kernel.F[np.ix_(idx, idx)]
    V = kernel.V[idx]
    worst = np.inf
    for _ in range(samples):
        f = rng.standard_normal(depth + 1)
        f /= np.linalg.norm(f)
        full = 1.0 + f @ F @ f
        bound = np.sum(kernel.gamma * (V.T @ f) ** 2)
        worst = min(worst, (full - bound) / max(1.0, abs(full)))
    return float(worst)


@dataclass
class GLMSolution:
    """Rows ``K(n, n + side*j)``, ``j = 0..depth``, for ``n`` in ``n_range``."""

    side: int
    n_range: Tuple[int, int]
    depth: int
    rows: np.ndarray
    min_eigs: np.ndarray
    residuals: np.ndarray
    conditions: np.ndarray

    def K(self, n: int, m: int) -> float:
        j = self.side * (m - n)
        if j < 0:
            return 0.0
        if j > self.depth:
            return 0.0
        return float(self.rows[n - self.n_range[0], j])

    def diag(self) -> np.ndarray:
        return self.rows[:, 0]

    def to_kernel(self) -> TransformationKernel:
        """Square kernel on ``n_range`` (entries reaching beyond it are dropped)."""
        n0, n1 = self.n_range
        N = n1 - n0 + 1
        K = np.zeros((N, N))
        for i in range(N):
            for j in range(self.depth + 1):
                m = i + self.side * j
                if 0 <= m < N:
                    K[i, m] = self.rows[i, j]
        return TransformationKernel(self.side, n0, K, 0.0, 0)


def _auto_depth(kernel: GLMKernel, n_range, tol_tail: float, margin: int = 4) -> int:
    s, env = kernel.envelope()
    side = kernel.side
    order = np.argsort(side * s)
    s, env = s[order], env[order]
    big = np.nonzero(env >= tol_tail)[0]
    if big.size == 0:
        return margin
    last = big[-1]
    if last == s.size - 1:
        raise TailTruncationTooLarge("F does not drop below %.1e on the assembled range; "
                                     "a finer grid or a smaller window is needed" % tol_tail)
    s_star = s[last + 1]
    far = n_range[0] if side > 0 else n_range[1]
    return int(max(side * s_star - 2 * side * far, 0) + margin)


def solve_glm(kernel: GLMKernel, n_range: Tuple[int, int], depth: int, cond_max: float = 1e12) -> GLMSolution:
    """Solve ``(1 + F_n) K~ = delta_0 / K(n,n)`` for every ``n`` in ``n_range``.

    ``I + F~_n`` is factored by Cholesky and the bound-state part is added
    through the Woodbury identity with an SPD capacitance matrix, which keeps
    the solve accurate when ``hat psi_q`` is large.
    """
    n0, n1 = n_range
    rows = np.zeros((n1 - n0 + 1, depth + 1))
    eigs = np.zeros(n1 - n0 + 1)
    res = np.zeros(n1 - n0 + 1)
    conds = np.zeros(n1 - n0 + 1)
    e0 = np.zeros(depth + 1)
    e0[0] = 1.0
    for i, n in enumerate(range(n0, n1 + 1)):
        Ft, V = kernel.block(n, depth)
        B = np.eye(depth + 1) + Ft
        ev_B = np.linalg.eigvalsh(B)
        A = B + (V * kernel.gamma) @ V.T
        eigs[i] = np.linalg.eigvalsh(A)[0]
        if eigs[i] <= 0 or ev_B[0] <= 0 or np.any(kernel.gamma <= 0):
            raise NotPositive("1 + F_n is not positive at n=%d (smallest eigenvalue %.3e)" % (n, eigs[i]))
        conds[i] = ev_B[-1] / ev_B[0]
        if conds[i] > cond_max:
            raise IllConditioned("condition number %.2e at n=%d" % (conds[i], n))
        try:
            cf = cho_factor(B)
        except LinAlgError as exc:
            raise NotPositive("Cholesky factorisation failed at n=%d" % n) from exc
        y = cho_solve(cf, e0)
        if V.shape[1]:
            Y = cho_solve(cf, V)
            # scale columns so the capacitance matrix stays O(1)
            sc = 1.0 / np.maximum(np.linalg.norm(V, axis=0), 1e-300)
            Vs, Ys = V * sc, Y * sc
            Cap = np.diag(sc ** 2 / kernel.gamma) + Vs.T @ Ys
            cc = cho_factor(0.5 * (Cap + Cap.T))
            u = y - Ys @ cho_solve(cc, Vs.T @ y)
        else:
            u = y
        if u[0] <= 0:
            raise NotPositive("<delta_0, (1+F_n)^{-1} delta_0> <= 0 at n=%d" % n)
        k = np.sqrt(u[0])
        rows[i] = u / k
        # relative residual of K(n,.) + K(n,.) F_n - delta_0 / K(n,n)
        Kr = rows[i]
        t_ref = Kr @ Ft
        t_b = ((Kr @ V) * kernel.gamma) @ V.T
        r = Kr + t_ref + t_b - e0 / k
        scale = 1.0 + np.abs(Kr) @ (np.abs(Ft) + np.abs((V * kernel.gamma) @ V.T))
        res[i] = float(np.max(np.abs(r) / scale))
    return GLMSolution(kernel.side, (n0, n1), depth, rows, eigs, res, conds)


def _side_mean(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    both = np.vstack([u, v])
    cnt = np.sum(np.isfinite(both), axis=0)
    tot = np.nansum(both, axis=0)
    return np.where(cnt > 0, tot / np.maximum(cnt, 1), np.nan)


@dataclass
class ReconstructionResult:
    n: np.ndarray
    a_q: np.ndarray
    b_q: np.ndarray
    a_plus: np.ndarray
    b_plus: np.ndarray
    a_minus: np.ndarray
    b_minus: np.ndarray
    K_plus: Optional[GLMSolution]
    K_minus: Optional[GLMSolution]
    diagnostics: dict = field(default_factory=dict)

    @property
    def a(self) -> np.ndarray:
        """Combined coefficients (mean of the available sides)."""
        return _side_mean(self.a_plus, self.a_minus)

    @property
    def b(self) -> np.ndarray:
        return _side_mean(self.b_plus, self.b_minus)

    def consistency(self) -> float:
        da = np.abs(self.a_plus - self.a_minus)
        db = np.abs(self.b_plus - self.b_minus)
        both = np.isfinite(da) & np.isfinite(db)
        return float(max(np.max(da[both], initial=0.0), np.max(db[both], initial=0.0)))

    def to_csv(self) -> str:
        lines = ["n,a_q,b_q,a_plus,b_plus,a_minus,b_minus,a_rec,b_rec,res_a,res_b"]
        a, b = self.a, self.b
        for i, n in enumerate(self.n):
            lines.append("%d,%s" % (n, ",".join(repr(float(v)) for v in (
                self.a_q[i], self.b_q[i], self.a_plus[i], self.b_plus[i], self.a_minus[i], self.b_minus[i],
                a[i], b[i], abs(self.a_plus[i] - self.a_minus[i]), abs(self.b_plus[i] - self.b_minus[i])))))
        return "\n".join(lines) + "\n"


def _coefficients(sol: GLMSolution, op_q: BackgroundOperator, n: np.ndarray):
    a = np.full(n.shape, np.nan)
    b = np.full(n.shape, np.nan)
    lo, hi = sol.n_range
    K = sol.K
    for i, k in enumerate(n):
        aq, bq, aqm = op_q.a(k)[0], op_q.b(k)[0], op_q.a(k - 1)[0]
        if sol.side > 0:
            if lo <= k and k + 1 <= hi:
                a[i] = aq * K(k + 1, k + 1) / K(k, k)
            if lo <= k - 1 and k <= hi:
                b[i] = bq + aq * K(k, k + 1) / K(k, k) - aqm * K(k - 1, k) / K(k - 1, k - 1)
        else:
            if lo <= k and k + 1 <= hi:
                a[i] = aq * K(k, k) / K(k + 1, k + 1)
            if lo <= k and k + 1 <= hi:
                b[i] = bq - aq * K(k + 1, k) / K(k + 1, k + 1) + aqm * K(k, k - 1) / K(k, k)
    return a, b


def reconstruct(sol_plus: Optional[GLMSolution], sol_minus: Optional[GLMSolution], op_q: BackgroundOperator,
                tol: float = 1e-6, raise_on_mismatch: bool = False) -> ReconstructionResult:
    """Coefficients from the transformation kernels of either or both sides."""
    if sol_plus is None and sol_minus is None:
        raise InvalidInput("at least one side is required")
    ranges = [s.n_range for s in (sol_plus, sol_minus) if s is not None]
    n = np.arange(min(r[0] for r in ranges), max(r[1] for r in ranges) + 1)
    nanv = np.full(n.shape, np.nan)
    ap, bp = _coefficients(sol_plus, op_q, n) if sol_plus is not None else (nanv, nanv)
    am, bm = _coefficients(sol_minus, op_q, n) if sol_minus is not None else (nanv.copy(), nanv.copy())
    out = ReconstructionResult(n, op_q.a(n), op_q.b(n), ap, bp, am, bm, sol_plus, sol_minus)
    a, b = out.a, out.b
    fin = np.isfinite(a) & np.isfinite(b)
    nn = n[fin]
    summ = {
        "n_weighted_a_increments": float(np.sum(np.abs(nn[:-1]) * np.abs(np.diff(a[fin] - out.a_q[fin])))),
        "n_weighted_b_increments": float(np.sum(np.abs(nn[:-1]) * np.abs(np.diff(b[fin] - out.b_q[fin])))),
    }
    out.diagnostics = {"consistency": out.consistency(), "tolerance": tol, **summ}
    if np.any(a[fin] <= 0):
        raise ConsistencyFailure("reconstructed a(n) is not positive")
    if raise_on_mismatch and out.consistency() > tol:
        raise ConsistencyFailure("one-sided reconstructions differ by %.2e" % out.consistency())
    return out


def invert(data: ScatteringData, n_range: Tuple[int, int] = (-10, 10), depth: Optional[int] = None,
           tol_tail: float = 1e-10, op_q: Optional[BackgroundOperator] = None, sides=(1, -1),
           tol: float = 1e-6, raise_on_mismatch: bool = False, max_depth: int = 200):
    """Full inverse step: assemble, solve and reconstruct on ``n_range`` from the requested sides."""
    op_q = data.background() if op_q is None else op_q
    n0, n1 = n_range
    sols, kernels, depths = {}, {}, {}
    # Fourier coefficients on N nodes alias once |l + m| nears N; keep the probe well inside
    nodes = int(np.asarray(data.lam).size)
    probe_cap = max(nodes // 4 - max(abs(n0), abs(n1)) - 1, 1)
    for side in sides:
        probe = depth if depth is not None else min(max_depth, probe_cap)
        l0, l1 = (n0 - 1, n1 + 1 + probe) if side > 0 else (n0 - 1 - probe, n1 + 1)
        ker = assemble_F(data, op_q, side, l0, l1)
        d = depth if depth is not None else _auto_depth(ker, (n0 - 1, n1 + 1), tol_tail)
        if d > probe:
            raise TailTruncationTooLarge("required depth %d exceeds the resolvable %d; "
                                         "a finer grid or a smaller window is needed" % (d, probe))
        kernels[side], depths[side] = ker, d
        sols[side] = solve_glm(ker, (n0 - 1, n1 + 1), d)
    res = reconstruct(sols.get(1), sols.get(-1), op_q, tol, raise_on_mismatch)
    keep = (res.n >= n0) & (res.n <= n1)
    for name in ("n", "a_q", "b_q", "a_plus", "b_plus", "a_minus", "b_minus"):
        setattr(res, name, getattr(res, name)[keep])
    res.diagnostics.update({
        "consistency": res.consistency(),
        "depth": {str(s): int(d) for s, d in depths.items()},
        "min_eigenvalue": {str(s): sols[s].min_eigs.tolist() for s in sols},
        "glm_residual": {str(s): float(np.max(sols[s].residuals)) for s in sols},
        "F_imag_residual": {str(s): kernels[s].imag_residual for s in kernels},
        "F_presym_residual": {str(s): kernels[s].presym_residual for s in kernels},
    })
    return res, sols, kernels


def verify_F_decay(kernel: GLMKernel, pert, zero_tol: float = 1e-9):
    """Smallest ``C`` with ``|F(l, m)| <= C * tail((l+m)/2)`` on the assembled square."""
    from .jost import DecayReport, _tail

    F = kernel.F
    C, beyond = 0.0, 0.0
    for i in range(F.shape[0]):
        for j in range(i, F.shape[1]):
            t = _tail(pert, kernel.l0 + i, kernel.l0 + j, kernel.side)
            v = abs(F[i, j])
            if t > 0:
                C = max(C, v / t)
            else:
                beyond = max(beyond, v)
    return DecayReport(C, beyond, bool(np.isfinite(C) and beyond < zero_tol))


def diagonal_difference_sum(kernel: GLMKernel, n_range: Tuple[int, int]) -> float:
    """``sum |n| |F(n,n) - F(n+1,n+1)|`` over ``n_range``."""
    n = np.arange(n_range[0], n_range[1])
    d = np.array([kernel(k, k) - kernel(k + 1, k + 1) for k in n])
    return float(np.sum(np.abs(n) * np.abs(d)))
