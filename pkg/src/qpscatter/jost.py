"""Jost solutions of a compactly supported perturbation and the transformation kernels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple

import numpy as np

from .background import BackgroundOperator, CircleRule
from .errors import InstabilityDetected, InvalidInput, QuadratureFailure, UnsupportedPoint


@dataclass(frozen=True)
class Perturbation:
    """``a(n) = a_q(n) + da(n)``, ``b(n) = b_q(n) + db(n)`` with finite support."""

    sites: tuple = ()  # sorted ((n, da, db), ...)

    @classmethod
    def from_sites(cls, sites: Iterable[Tuple[int, float, float]]) -> "Perturbation":
        acc = {}
        for n, da, db in sites:
            old = acc.get(int(n), (0.0, 0.0))
            acc[int(n)] = (old[0] + float(da), old[1] + float(db))
        return cls(tuple((n, da, db) for n, (da, db) in sorted(acc.items()) if da or db))

    @property
    def is_zero(self) -> bool:
        return not self.sites

    @property
    def support(self) -> Optional[Tuple[int, int]]:
        if self.is_zero:
            return None
        return self.sites[0][0], self.sites[-1][0]

    def da(self, n):
        d = {k: v for k, v, _ in self.sites}
        return np.array([d.get(int(k), 0.0) for k in np.atleast_1d(n)])

    def db(self, n):
        d = {k: v for k, _, v in self.sites}
        return np.array([d.get(int(k), 0.0) for k in np.atleast_1d(n)])

    def size(self, n):
        return np.abs(self.da(n)) + np.abs(self.db(n))


class PerturbedOperator:
    """The perturbed Jacobi operator together with its background."""

    def __init__(self, op_q: BackgroundOperator, pert: Perturbation):
        self.q = op_q
        self.pert = pert
        if not pert.is_zero:
            lo, hi = pert.support
            n = np.arange(lo, hi + 1)
            if np.any(op_q.a(n) + pert.da(n) <= 0):
                raise InvalidInput("perturbed a(n) must stay positive")
        lo, hi = pert.support if not pert.is_zero else (0, -1)
        # psi_+ = psi_{q,+} for n >= n_plus, psi_- = psi_{q,-} for n <= n_minus
        self.n_plus = hi + 1
        self.n_minus = lo

    def a(self, n):
        return self.q.a(n) + self.pert.da(n)

    def b(self, n):
        return self.q.b(n) + self.pert.db(n)

    def A(self, n: int, side: int) -> float:
        """``A_+(n) = prod_{j>=n} a_q/a``; ``A_-(n) = prod_{j<n} a_q/a``."""
        if self.pert.is_zero:
            return 1.0
        lo, hi = self.pert.support
        j = np.arange(max(n, lo), hi + 1) if side > 0 else np.arange(lo, min(n, hi + 1))
        return float(np.prod(self.q.a(j) / self.a(j))) if j.size else 1.0

    def B(self, n: int, side: int) -> float:
        """``B_+(n) = sum_{m>n} (b_q - b)``; ``B_-(n) = sum_{m<n} (b_q - b)``."""
        if self.pert.is_zero:
            return 0.0
        lo, hi = self.pert.support
        j = np.arange(max(n + 1, lo), hi + 1) if side > 0 else np.arange(lo, min(n, hi + 1))
        return float(-np.sum(self.pert.db(j))) if j.size else 0.0

    def jost_table(self, z, side: int, n_lo: int, n_hi: int, lip=1, limit: bool = False) -> np.ndarray:
        """``psi_side(z, n)`` for ``n_lo <= n <= n_hi``; shape ``z.shape + (n_hi - n_lo + 1,)``.

        The branch is copied from the background beyond the support and carried
        inward by the perturbed recurrence (the growing direction off the circle).
        """
        z = np.asarray(z, dtype=complex)
        if not limit and np.any(np.isin(z, self.q.curve.E + 0j)):
            raise UnsupportedPoint("band edge requires limit=True")
        if side > 0:
            top = max(n_hi, self.n_plus + 1)
            bot = min(n_lo, self.n_plus)
            out = np.empty(z.shape + (top - bot + 1,), dtype=complex)
            q0 = min(self.n_plus, 0)
            q = self.q.psi(z, self.n_plus, top, 1, lip, limit)
            out[..., self.n_plus - bot:] = q[..., self.n_plus - q0: top - q0 + 1]
            n = np.arange(bot, self.n_plus + 1)
            a, b, ak = self.a(n - 1), self.b(n), self.a(n)
            for k in range(self.n_plus, bot, -1):
                i = k - bot
                out[..., i - 1] = ((z - b[i]) * out[..., i] - ak[i] * out[..., i + 1]) / a[i]
        else:
            bot = min(n_lo, self.n_minus - 1)
            top = max(n_hi, self.n_minus)
            out = np.empty(z.shape + (top - bot + 1,), dtype=complex)
            q = self.q.psi(z, bot, self.n_minus, -1, lip, limit)
            out[..., : self.n_minus - bot + 1] = q[..., : self.n_minus - bot + 1]
            n = np.arange(bot, top + 1)
            a, b, am = self.a(n), self.b(n), self.a(n - 1)
            for k in range(self.n_minus, top):
                i = k - bot
                out[..., i + 1] = ((z - b[i]) * out[..., i] - am[i] * out[..., i - 1]) / a[i]
        if not np.all(np.isfinite(out)):
            raise InstabilityDetected("Jost recursion overflowed")
        return out[..., n_lo - bot: n_hi - bot + 1]

    def recurrence_residual(self, u: np.ndarray, z, n_lo: int) -> float:
        n = np.arange(n_lo + 1, n_lo + len(u) - 1)
        a, b, am = self.a(n), self.b(n), self.a(n - 1)
        lhs = a * u[2:] + am * u[:-2] + b * u[1:-1]
        scale = np.abs(a * u[2:]) + np.abs(am * u[:-2]) + np.abs((b - z) * u[1:-1]) + 1e-300
        return float(np.max(np.abs(lhs - z * u[1:-1]) / scale))


@dataclass
class JostSolution:
    z: complex
    side: int
    n: np.ndarray
    values: np.ndarray
    A0: float
    B0: float


def jost(op_q: BackgroundOperator, pert: Perturbation, z, side: int, n_range=(-20, 20), lip: int = 1) -> JostSolution:
    P = PerturbedOperator(op_q, pert)
    n0, n1 = n_range
    vals = P.jost_table(complex(z), side, n0, n1, lip)
    return JostSolution(complex(z), side, np.arange(n0, n1 + 1), vals, P.A(0, side), P.B(0, side))


@dataclass
class TransformationKernel:
    """``K[n - n0, m - n0]`` for ``n0 <= n, m <= n1``; off-side entries kept for diagnostics."""

    side: int
    n0: int
    K: np.ndarray
    imag_residual: float
    nodes_per_band: int
    refinement_change: float = 0.0

    @property
    def n1(self) -> int:
        return self.n0 + self.K.shape[0] - 1

    def __call__(self, n: int, m: int) -> float:
        return float(self.K[n - self.n0, m - self.n0])

    def triangularity(self) -> float:
        N = self.K.shape[0]
        i, j = np.indices((N, N))
        mask = self.side * (j - i) < 0
        return float(np.max(np.abs(self.K[mask]), initial=0.0))

    def to_csv(self, pert: Optional[Perturbation] = None) -> str:
        lines = ["n,m,K,bound_tail"]
        for i in range(self.K.shape[0]):
            for j in range(self.K.shape[1]):
                n, m = self.n0 + i, self.n0 + j
                if self.side * (m - n) < 0:
                    continue
                tail = _tail(pert, n, m, self.side) if pert is not None else float("nan")
                lines.append("%d,%d,%r,%r" % (n, m, float(self.K[i, j]), tail))
        return "\n".join(lines) + "\n"


def _kernel_at(P: PerturbedOperator, rule: CircleRule, side: int, n0: int, n1: int):
    psi = P.jost_table(rule.lam + 0j, side, n0, n1, rule.lip)
    psq = P.q.psi(rule.lam + 0j, n0, n1, -side, rule.lip)
    lo = min(n0, 0)
    psq = psq[:, n0 - lo: n1 - lo + 1]
    K = (rule.nu[:, None] * psi).T @ psq
    return K


def kernel(op_q: BackgroundOperator, pert: Perturbation, side: int, window: Optional[int] = None,
           nodes_per_band: int = 64, tol: float = 1e-10, max_nodes: int = 4096) -> TransformationKernel:
    """``K_side(n, m) = (1/2 pi i) oint psi_side(w,n) psi_{q,-side}(w,m) d omega``, both lips summed."""
    N = op_q.window if window is None else int(window)
    P = PerturbedOperator(op_q, pert)
    n = max(int(nodes_per_band), N + 8)
    prev = _kernel_at(P, op_q.circle_rule(n), side, -N, N)
    while True:
        n *= 2
        cur = _kernel_at(P, op_q.circle_rule(n), side, -N, N)
        change = float(np.max(np.abs(cur - prev)))
        if change < tol:
            break
        if n >= max_nodes:
            raise QuadratureFailure("kernel quadrature not converged (change %.2e)" % change)
        prev = cur
    return TransformationKernel(side, -N, cur.real.copy(), float(np.max(np.abs(cur.imag))), n, change)


def _tail(pert: Optional[Perturbation], n: int, m: int, side: int) -> float:
    """Right side of the kernel decay bound (without the constant).

    ``a(j)`` couples sites ``j`` and ``j+1``, so on the + side it enters from
    ``j >= [(m+n)/2]`` while ``b(j)`` enters from ``j >= [(m+n)/2] + 1``; the
    - side is the mirror image with ceiling in place of floor.
    """
    if pert is None or pert.is_zero:
        return 0.0
    lo, hi = pert.support
    j = np.arange(lo, hi + 1)
    if side > 0:
        c = (m + n) // 2
        return float(np.abs(pert.da(j))[j >= c].sum() + np.abs(pert.db(j))[j >= c + 1].sum())
    c = -((-(m + n)) // 2)
    return float(pert.size(j)[j <= c - 1].sum())


@dataclass
class DecayReport:
    C: float
    max_beyond_support: float
    passed: bool


def verify_decay(K: TransformationKernel, pert: Perturbation, zero_tol: float = 1e-9) -> DecayReport:
    """Smallest ``C`` with ``|K(n,m)| <= C * tail((n+m)/2)`` over strictly off-diagonal entries."""
    C, beyond = 0.0, 0.0
    for i in range(K.K.shape[0]):
        for j in range(K.K.shape[1]):
            n, m = K.n0 + i, K.n0 + j
            if K.side * (m - n) <= 0:
                continue
            t = _tail(pert, n, m, K.side)
            v = abs(K.K[i, j])
            if t > 0:
                C = max(C, v / t)
            else:
                beyond = max(beyond, v)
    return DecayReport(C, beyond, bool(np.isfinite(C) and beyond < zero_tol))


def verify_intertwining(op_q: BackgroundOperator, pert: Perturbation, K: TransformationKernel) -> float:
    """Max interior residual of ``H K = K H_q`` written entrywise."""
    P = PerturbedOperator(op_q, pert)
    n = np.arange(K.n0, K.n1 + 1)
    a, b, aq, bq = P.a(n), P.b(n), op_q.a(n), op_q.b(n)
    M = K.K
    lhs = a[:-2, None] * M[:-2, 1:-1] + b[1:-1, None] * M[1:-1, 1:-1] + a[1:-1, None] * M[2:, 1:-1]
    rhs = aq[None, :-2] * M[1:-1, :-2] + bq[None, 1:-1] * M[1:-1, 1:-1] + aq[None, 1:-1] * M[1:-1, 2:]
    return float(np.max(np.abs(lhs - rhs)))


def representation_residual(op_q: BackgroundOperator, pert: Perturbation, K: TransformationKernel,
                            z, lip, n_values) -> float:
    """``max |sum_m K(n,m) psi_{q,side}(w,m) - psi_side(w,n)|`` over the given ``n``."""
    P = PerturbedOperator(op_q, pert)
    z = np.atleast_1d(np.asarray(z, complex))
    lip = np.broadcast_to(np.asarray(lip), z.shape)
    psq = op_q.psi(z, K.n0, K.n1, K.side, lip)[:, K.n0 - min(K.n0, 0):][:, : K.K.shape[0]]
    worst = 0.0
    for n in n_values:
        direct = P.jost_table(z, K.side, n, n, lip)[:, 0]
        rep = psq @ K.K[n - K.n0]
        worst = max(worst, float(np.max(np.abs(rep - direct))))
    return worst


def jost_csv(op_q: BackgroundOperator, pert: Perturbation, side: int, rule: CircleRule, n_range) -> str:
    P = PerturbedOperator(op_q, pert)
    n0, n1 = n_range
    tab = P.jost_table(rule.lam + 0j, side, n0, n1, rule.lip)
    lines = ["w_re,w_im,n,psi_re,psi_im"]
    for k in range(rule.size):
        for i, n in enumerate(range(n0, n1 + 1)):
            lines.append("%r,%r,%d,%r,%r" % (rule.w[k].real, rule.w[k].imag, n, tab[k, i].real, tab[k, i].imag))
    return "\n".join(lines) + "\n"
