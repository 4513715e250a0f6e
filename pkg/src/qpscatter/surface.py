"""Numerics of the hyperelliptic surface attached to a finite-band spectrum.

The surface is the two-sheeted cover of the plane branched at the band edges
``E_0 < ... < E_{2g+1}``.  Every line integral used here has inverse square
root singularities at the edges only, so integrals over a full interval
between consecutive edges use Gauss-Chebyshev nodes (``x = m + h cos t``)
and integrals from an edge to an arbitrary point use the substitution
``zeta = E_k + (z - E_k) s**2`` followed by adaptive Gauss-Legendre.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .errors import (
    AmbiguousSlit,
    InvalidInput,
    NoConvergence,
    PathThroughBranchPoint,
    QuadratureFailure,
    RootOutsideGap,
    SingularCurve,
    TruncationTooSmall,
)

MIN_EDGE_SPACING = 1e-8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


@dataclass(frozen=True)
class HyperellipticCurve:
    """Band edges of the spectrum, ``R(z) = prod_j (z - E_j)``."""

    edges: tuple

    def __init__(self, edges: Sequence[float]):
        e = np.asarray(edges, dtype=float).ravel()
        if e.size < 2 or e.size % 2:
            raise InvalidInput("need an even number (>= 2) of band edges")
        if not np.all(np.isfinite(e)):
            raise InvalidInput("band edges must be finite")
        if np.any(np.diff(e) < MIN_EDGE_SPACING):
            raise InvalidInput(
                "band edges must be strictly increasing with spacing >= %g "
                "(closed gaps are not supported)" % MIN_EDGE_SPACING
            )
        object.__setattr__(self, "edges", tuple(float(x) for x in e))

    @property
    def E(self) -> np.ndarray:
        return np.asarray(self.edges)

    @property
    def genus(self) -> int:
        return len(self.edges) // 2 - 1

    def band(self, l: int) -> tuple:
        return self.edges[2 * l], self.edges[2 * l + 1]

    def gap(self, j: int) -> tuple:
        """Gap ``j`` (1-based) is ``(E_{2j-1}, E_{2j})``."""
        return self.edges[2 * j - 1], self.edges[2 * j]

    def in_spectrum(self, x: float, tol: float = 0.0) -> bool:
        return any(a - tol <= x <= b + tol for a, b in map(self.band, range(self.genus + 1)))

    def locate(self, x: float) -> int:
        """Index ``i`` of the interval ``[E_i, E_{i+1}]`` containing ``x``; -1 left, 2g+1 right."""
        return int(np.searchsorted(self.E, x, side="right")) - 1

    def R(self, z):
        return np.prod(np.subtract.outer(np.asarray(z, dtype=complex), self.E), axis=-1)


@dataclass(frozen=True)
class SurfacePoint:
    z: complex
    sheet: int = 1
    at_infinity: bool = False

    def __post_init__(self):
        if self.sheet not in (1, -1):
            raise InvalidInput("sheet must be +1 or -1")


def sqrt_R(curve: HyperellipticCurve, z, sheet: int = 1):
    """Fixed branch ``-prod_j sqrt(z - E_j)`` times ``sheet``.

    Real arguments are read as boundary values from the upper half plane.
    """
    z = np.asarray(z)
    if not np.iscomplexobj(z):
        z = z.astype(float) + 0j
    out = -np.prod(np.sqrt(np.subtract.outer(z, curve.E)), axis=-1)
    return sheet * out


def interval_rule(curve: HyperellipticCurve, i: int, n: int):
    """Nodes and weights for ``int_{E_i}^{E_{i+1}} f(x) / R^{1/2}(x + i0) dx``."""
    E = curve.E
    a, b = E[i], E[i + 1]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    t = (np.arange(n) + 0.5) * np.pi / n
    x = mid + half * np.cos(t)
    others = np.delete(E, [i, i + 1])
    p = np.prod(np.sqrt(np.abs(np.subtract.outer(x, others))), axis=-1) if others.size else np.ones(n)
    phase = -(1j ** (2 * curve.genus + 1 - i))
    return x, (np.pi / n) / (phase * p)


def _powers(x, deg):
    return np.power.outer(np.asarray(x), np.arange(deg + 1))


def _adaptive_gl(f, tol=1e-14, max_depth=40):
    """Integrate vector-valued ``f(s)`` over ``[0, 1]`` by bisection."""

    def rule(a, b):
        s = 0.5 * (b - a) * _GL_NODES + 0.5 * (a + b)
        return 0.5 * (b - a) * (f(s) @ _GL_WEIGHTS)

    stack = [(0.0, 1.0, rule(0.0, 1.0), 0)]
    total = 0.0
    while stack:
        a, b, whole, depth = stack.pop()
        m = 0.5 * (a + b)
        left, right = rule(a, m), rule(m, b)
        err = np.max(np.abs(left + right - whole))
        if err <= tol * max(1.0, np.max(np.abs(left + right))) or depth >= max_depth:
            if depth >= max_depth and err > 1e-8:
                raise QuadratureFailure("adaptive path quadrature did not converge")
            total = total + left + right
        else:
            stack.append((a, m, left, depth + 1))
            stack.append((m, b, right, depth + 1))
    return total


@dataclass(frozen=True)
class ThetaParams:
    """Lattice truncation for the Riemann theta function of ``tau``."""

    tau: np.ndarray
    radius: int
    tol: float = 1e-12

    @cached_property
    def lam_min(self) -> float:
        return float(np.linalg.eigvalsh(self.tau.imag).min())

    @cached_property
    def lattice(self) -> np.ndarray:
        g = self.tau.shape[0]
        r = range(-self.radius, self.radius + 1)
        return np.array(list(itertools.product(r, repeat=g)), dtype=float).reshape(-1, g)

    @cached_property
    def _quad_phase(self) -> np.ndarray:
        M = self.lattice
        return np.exp(1j * np.pi * np.einsum("ki,ij,kj->k", M, self.tau, M))

    def tail_bound(self, imag_norm: float = 0.0) -> float:
        """Bound on the dropped terms, relative to the largest term of the sum."""
        g = self.tau.shape[0]
        if g == 0:
            return 0.0
        lam = self.lam_min
        if lam <= 0:
            return np.inf
        total = 0.0
        r = self.radius + 1
        while True:
            shell = (2 * r + 1) ** g - (2 * r - 1) ** g
            term = shell * np.exp(-np.pi * lam * r * r + 2 * np.pi * np.sqrt(g) * r * imag_norm)
            total += term
            if r > self.radius + 5 and term <= 1e-30 * total:
                break
            r += 1
            if r > self.radius + 10000:
                return np.inf
        return total

    @classmethod
    def auto(cls, tau, tol: float = 1e-12, imag_norm: float = 0.0) -> "ThetaParams":
        tau = np.asarray(tau, dtype=complex)
        if tau.size and np.linalg.eigvalsh(tau.imag).min() <= 0:
            raise InvalidInput("Im tau must be positive definite")
        r = 1
        while True:
            p = cls(tau, r, tol)
            if p.tail_bound(imag_norm) < tol:
                return p
            r += 1


def _theta_terms(zvec, params: ThetaParams):
    z = np.asarray(zvec, dtype=complex)
    g = params.tau.shape[0]
    if z.shape[-1] != g:
        raise InvalidInput("theta argument has wrong dimension")
    y = z.imag.reshape(-1, g)
    if g:
        ynorm = float(np.max(np.linalg.norm(y, axis=1))) if y.size else 0.0
        if params.tail_bound(ynorm) > params.tol:
            raise TruncationTooSmall(
                "theta truncation radius %d too small for |Im z| = %.3g" % (params.radius, ynorm)
            )
    M = params.lattice
    return M, params._quad_phase * np.exp(2j * np.pi * (z @ M.T))


def theta(zvec, params: ThetaParams):
    """Truncated lattice sum ``sum_m exp(pi i m.tau.m + 2 pi i m.z)``; vectorized over leading axes."""
    if params.tau.shape[0] == 0:
        return np.ones(np.shape(zvec)[:-1], dtype=complex)
    _, terms = _theta_terms(zvec, params)
    return terms.sum(axis=-1)


def theta_grad(zvec, params: ThetaParams):
    """Gradient of theta, from the term-wise differentiated lattice sum."""
    if params.tau.shape[0] == 0:
        return np.zeros(np.shape(zvec), dtype=complex)
    M, terms = _theta_terms(zvec, params)
    return 2j * np.pi * (terms @ M)


class SurfaceData:
    """Periods, differentials and the quasi-momentum map of a curve.

    Construction doubles the number of Chebyshev nodes until the a-period
    matrix and ``tau`` agree at two resolutions to ``tol``.
    """

    def __init__(self, curve: HyperellipticCurve, tol: float = 1e-13, max_nodes: int = 1 << 16):
        self.curve = curve
        self.tol = tol
        g = curve.genus
        n = 64
        prev = self._periods(n)
        while True:
            cur = self._periods(2 * n)
            err = max(np.max(np.abs(cur[0] - prev[0]), initial=0.0), np.max(np.abs(cur[2] - prev[2]), initial=0.0))
            scale = max(1.0, np.max(np.abs(cur[0]), initial=0.0))
            n *= 2
            if err <= tol * scale:
                break
            if n > max_nodes:
                raise QuadratureFailure("period quadrature not converged (err %.2e)" % err)
            prev = cur
        self.nodes = n
        self.C, self.c, self.tau = cur
        self.period_error = float(err)
        if g and np.linalg.eigvalsh(self.tau.imag).min() <= 0:
            raise SingularCurve("Im tau is not positive definite")
        self.zeta_numer = self.c.copy()  # row i: ascending coefficients of zeta_i
        self._third_kind()
        self.xi = self._riemann_constants()

    # -- construction ---------------------------------------------------
    def _periods(self, n):
        cv, g = self.curve, self.curve.genus
        if g == 0:
            z = np.zeros((0, 0))
            return z, z, z.astype(complex)
        C = np.empty((g, g))
        for k in range(1, g + 1):
            x, w = interval_rule(cv, 2 * k - 1, n)
            C[:, k - 1] = 2.0 * (w @ _powers(x, g - 1)).real
        if abs(np.linalg.det(C)) < 1e-300 or np.linalg.cond(C) > 1e14:
            raise SingularCurve("a-period matrix is numerically singular")
        c = np.linalg.inv(C)
        tau = np.zeros((g, g), dtype=complex)
        for l in range(g):
            x, w = interval_rule(cv, 2 * l, n)
            band = (w[:, None] * _powers(x, g - 1)).sum(axis=0) @ c.T
            tau[l:, :] += -2.0 * band
        tau = 1j * tau.imag
        return C, c, tau

    def _third_kind(self):
        cv, g, n = self.curve, self.curve.genus, self.nodes
        if g:
            A = np.empty((g, g))
            rhs = np.empty(g)
            for k in range(1, g + 1):
                x, w = interval_rule(cv, 2 * k - 1, n)
                I = (w @ _powers(x, g)).real
                A[k - 1] = I[:g]
                rhs[k - 1] = -I[g]
            p = np.linalg.solve(A, rhs)
            lams = np.sort(npoly.polyroots(np.append(p, 1.0)).real)
            for j, lam in enumerate(lams, start=1):
                lo, hi = cv.gap(j)
                if not lo < lam < hi:
                    raise RootOutsideGap("lambda_%d = %.6g outside gap (%g, %g)" % (j, lam, lo, hi))
        else:
            lams = np.zeros(0)
        self.lambdas = lams
        self.omega_numer = npoly.polyfromroots(lams) if g else np.array([1.0])
        self.b_tilde = 0.5 * sum(cv.edges) - float(lams.sum())
        masses = []
        for l in range(g + 1):
            x, w = interval_rule(cv, 2 * l, n)
            masses.append(((w @ npoly.polyval(x, self.omega_numer)) / (np.pi * 1j)).real)
        self.band_mass = np.array(masses)
        self.a_tilde = float(np.exp(self._log_capacity()))

    def _log_capacity(self):
        # g(x) = ln a~ - int ln(lam - x) dmu(lam) at one real point left of the spectrum
        E = self.curve.E
        x = E[0] - (E[-1] - E[0])
        total = 0.0
        for l in range(self.genus + 1):
            xs, w = self._rules[2 * l]
            dens = (w * npoly.polyval(xs, self.omega_numer) / (np.pi * 1j)).real
            total += dens @ np.log(xs - x)
        return self.g(x).real + total

    def _riemann_constants(self):
        # sum of Abel images of E_2, E_4, ..., E_2g, snapped to the exact half period
        g = self.genus
        if g == 0:
            return np.zeros(0, dtype=complex)
        v = self._edge_values(self.zeta_numer)[:, 2:2 * g + 1:2].sum(axis=1)
        f = np.round(2 * np.linalg.solve(self.tau.imag, v.imag)) % 2
        e = np.round(2 * (v - self.tau @ f / 2).real) % 2
        return (e + self.tau @ f) / 2.0

    # -- Abelian integrals ----------------------------------------------
    @cached_property
    def _rules(self):
        return [interval_rule(self.curve, i, self.nodes) for i in range(len(self.curve.edges) - 1)]

    def _edge_values(self, P: np.ndarray) -> np.ndarray:
        """Integrals of ``P(x) dx / R^{1/2}`` from ``E_0`` to each edge along the upper lip."""
        P = np.atleast_2d(P)
        vals = [np.zeros(P.shape[0], dtype=complex)]
        for x, w in self._rules:
            vals.append(vals[-1] + npoly.polyval(x, P.T) @ w if P.shape[1] else vals[-1])
        return np.array(vals).T  # (k, 2g+2)

    def abelian_integral(self, P, z, lip: int = 1, sheet: int = 1):
        """``int_{E_0}^{(z, sheet)} P(x) dx / R^{1/2}(x)`` along the canonical path.

        The path follows the upper lip of the real axis to the edge nearest to
        ``Re z`` and then runs straight to ``z``.  Points in the lower half
        plane (or real points with ``lip=-1``) use conjugate symmetry.
        """
        P = np.atleast_2d(np.asarray(P, dtype=float))
        z = complex(z)
        if not np.isfinite(z):
            raise InvalidInput("finite point required")
        if z.imag < 0 or (z.imag == 0 and lip < 0):
            return sheet * np.conj(self.abelian_integral(P, z.conjugate(), 1, 1))
        z = complex(z.real, abs(z.imag))
        E = self.curve.E
        i = self.curve.locate(z.real)
        if i < 0:
            k = 0
        elif i >= len(E) - 1:
            k = len(E) - 1
        else:
            k = i if z.real - E[i] <= E[i + 1] - z.real else i + 1
        base = self._edge_values(P)[:, k]
        d = z - E[k]
        if d == 0:
            return sheet * base
        if z.imag == 0 and np.min(np.abs(E - z.real)) < 1e-15 * max(1.0, abs(z.real)):
            raise PathThroughBranchPoint("point coincides with a branch point")
        others = np.delete(E, k)
        sd = np.sqrt(d)

        def f(s):
            zeta = E[k] + d * s * s
            den = np.prod(np.sqrt(np.subtract.outer(zeta, others)), axis=-1) if others.size else 1.0
            return (-2.0 * sd * npoly.polyval(zeta, P.T)) / den

        return sheet * (base + _adaptive_gl(f))

    def abelian_integral_infinity(self, P) -> np.ndarray:
        """``int_{E_0}^{infinity_+}`` for differentials regular at infinity (deg P <= g-1)."""
        P = np.atleast_2d(np.asarray(P, dtype=float))
        E = self.curve.E
        others = E[1:]

        # x = E0 - s^2/(1-s); sqrt(x-E0) = i s/sqrt(1-s)
        def f(s):
            x = E[0] - s * s / (1.0 - s)
            r_other = -np.prod(np.sqrt(np.subtract.outer(x + 0j, others)), axis=-1)
            dx_over_root = -(2.0 - s) / (1.0 - s) ** 1.5 / 1j
            return npoly.polyval(x, P.T) / r_other * dx_over_root

        s_max = 1.0 - 1e-14
        return _adaptive_gl(lambda t: f(t * s_max)) * s_max

    # -- public surface -------------------------------------------------
    @property
    def genus(self) -> int:
        return self.curve.genus

    def theta_params(self, tol: float = 1e-12, imag_norm: Optional[float] = None) -> ThetaParams:
        if imag_norm is None:
            imag_norm = float(np.abs(self.tau.imag).sum()) if self.genus else 0.0
        return ThetaParams.auto(self.tau, tol, imag_norm)

    def g(self, z, lip: int = 1) -> complex:
        """Abelian integral of the third kind from ``E_0``; ``exp(g)`` is the quasi-momentum."""
        return complex(self.abelian_integral(self.omega_numer, z, lip)[0])

    def g_equilibrium(self, z) -> complex:
        """``ln a~ - int ln(lambda - z) dmu(lambda)`` with the equilibrium measure (cross-check)."""
        z = complex(z)
        if z.imag < 0:
            return self.g_equilibrium(z.conjugate()).conjugate()
        total = 0.0
        for l in range(self.genus + 1):
            x, w = self._rules[2 * l]
            dens = (w * npoly.polyval(x, self.omega_numer) / (np.pi * 1j)).real
            total = total + dens @ np.conj(np.log(x - np.conj(z)))
        return np.log(self.a_tilde) - total

    def omega_density(self, z, lip: int = 1):
        """``dw/(w dz)`` i.e. ``prod (z - lambda_j) / R^{1/2}(z)``."""
        rz = sqrt_R(self.curve, z)
        if lip < 0:
            rz = -rz
        return npoly.polyval(np.asarray(z), self.omega_numer) / rz

    @cached_property
    def edge_images(self) -> np.ndarray:
        """``w(E_l)`` for every band edge."""
        vals = self._edge_values(self.omega_numer)[0]
        return np.exp(1j * vals.imag)

    @cached_property
    def cumulative_mass(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.band_mass)])

    def slit(self, j: int):
        """Endpoints ``(w(lambda_j), w(E_{2j}))`` of the j-th slit in the upper half disc."""
        return complex(np.exp(self.g(self.lambdas[j - 1]))), complex(self.edge_images[2 * j])

    def report(self) -> dict:
        return {
            "edges": list(self.curve.edges),
            "genus": self.genus,
            "tau_re": self.tau.real.tolist(),
            "tau_im": self.tau.imag.tolist(),
            "lambdas": self.lambdas.tolist(),
            "a_tilde": self.a_tilde,
            "b_tilde": self.b_tilde,
            "band_mass": self.band_mass.tolist(),
            "quadrature": {"nodes_per_interval": self.nodes, "period_error": self.period_error},
        }

    # -- inverse map ----------------------------------------------------
    @cached_property
    def _seed_table(self):
        E = self.curve.E
        span = max(E[-1] - E[0], 1e-3)
        xs = np.linspace(E[0] - span, E[-1] + span, 41)
        ys = span * np.logspace(-3, 2, 26)
        zs = [(xs[:, None] + 1j * ys[None, :]).ravel()]
        # points close above the gaps, where the two banks of a slit nearly touch
        for j in range(1, self.genus + 1):
            lo, hi = self.curve.gap(j)
            gx = lo + (hi - lo) * (0.5 - 0.5 * np.cos(np.linspace(0, np.pi, 21)[1:-1]))
            gy = (hi - lo) * np.logspace(-7, -1, 13)
            zs.append((gx[:, None] + 1j * gy[None, :]).ravel())
        zs = np.concatenate(zs)
        gs = np.array([self.g(z) for z in zs])
        return zs, gs

    def _solve_real(self, fun, a, b):
        return brentq(fun, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    def _newton(self, G: complex, z: complex, tol: float, maxiter: int) -> Optional[complex]:
        """Damped Newton for ``g(z) = G`` in the upper half plane; ``None`` on failure."""
        gz = self.g(z)
        for _ in range(maxiter):
            res = gz - G
            if abs(res) <= tol * max(1.0, abs(G)):
                return z
            step = res / self.omega_density(z)
            # never give away more than half of Im z (g' vanishes at lambda_j, steps can be huge)
            t = 1.0 if step.imag <= 0 else min(1.0, 0.5 * z.imag / step.imag)
            while True:
                zn = z - t * step
                gn = self.g(zn)
                if abs(gn - G) < abs(res) or t < 1e-12:
                    break
                t *= 0.5
            if not np.isfinite(gn) or zn.imag <= 0:
                return None
            z, gz = zn, gn
        return None

    def lambda_of_w(self, w, bank: Optional[str] = None, tol: float = 1e-13, maxiter: int = 100) -> complex:
        """Inverse of the quasi-momentum map.

        Points on a slit need ``bank='left'`` (``z < lambda_j``) or
        ``bank='right'``; points on the unit circle with ``Im w < 0`` map to
        the lower lip of the spectrum.
        """
        w = complex(w)
        E, cv = self.curve.E, self.curve
        r = abs(w)
        if r == 0 or r > 1 + 1e-12:
            raise InvalidInput("w must lie in the closed unit disc minus 0")
        if abs(w.imag) <= 1e-15 * r and abs(r - 1) > 1e-13:
            w = complex(w.real, 0.0)
        if w.imag < 0:
            return self.lambda_of_w(w.conjugate(), bank, tol, maxiter).conjugate()
        phi = float(np.angle(w)) if w.imag > 0 or w.real < 0 else 0.0
        if abs(r - 1) <= 1e-13:
            cm = np.pi * self.cumulative_mass
            l = int(np.clip(np.searchsorted(cm, phi, side="right") - 1, 0, self.genus))
            if abs(phi - cm[l]) < 1e-15:
                return complex(E[2 * l])
            if abs(phi - cm[l + 1]) < 1e-15:
                return complex(E[2 * l + 1])
            a, b = E[2 * l], E[2 * l + 1]
            return complex(self._solve_real(lambda x: self.g(x).imag - phi, a, b))
        if w.imag == 0 and w.real > 0:
            target = np.log(r)
            lo = E[0] - 1.0
            while self.g(lo).real > target:
                lo = E[0] - 2 * (E[0] - lo)
            return complex(self._solve_real(lambda x: self.g(x).real - target, lo, E[0]))
        if w.imag == 0 and w.real < 0:
            target = np.log(r)
            hi = E[-1] + 1.0
            while self.g(hi).real > target:
                hi = E[-1] + 2 * (hi - E[-1])
            return complex(self._solve_real(lambda x: self.g(x).real - target, E[-1], hi))
        for j in range(1, self.genus + 1):
            if abs(phi - np.pi * self.cumulative_mass[j]) < 4e-15:
                lam = self.lambdas[j - 1]
                target = np.log(r)
                gmin = self.g(lam).real
                if abs(target - gmin) < 1e-14:
                    return complex(lam)
                if target < gmin:
                    break  # on the ray past the tip: an ordinary interior point
                if bank not in ("left", "right"):
                    raise AmbiguousSlit("w lies on slit %d; pass bank='left' or 'right'" % j)
                a, b = (E[2 * j - 1], lam) if bank == "left" else (lam, E[2 * j])
                return complex(self._solve_real(lambda x: self.g(x).real - target, a, b))
        G = np.log(w)
        zs, gs = self._seed_table
        dist = np.abs(gs - G)
        if self.genus:
            # beside a slit the banks nearly touch in w; prefer seeds on the same bank
            angles = np.pi * self.cumulative_mass[1:-1]
            j = int(np.argmin(np.abs(angles - G.imag)))
            tip = self.g(self.lambdas[j]).real
            if G.real > tip:
                side = np.sign(G.imag - angles[j])
                wrong = (np.sign(gs.imag - angles[j]) != side) & (gs.real > tip)
                dist = dist + 10.0 * wrong
        starts = [zs[k] for k in np.argsort(dist)[:8]]
        if self.genus:
            # g' vanishes at lambda_j: seed from the local model g ~ g(lam) + h (z - lam)^2 / 2
            dnum = npoly.polyder(self.omega_numer)
            for lam in self.lambdas:
                d = G - self.g(lam)
                if abs(d) < 0.2:
                    h = npoly.polyval(lam, dnum) / sqrt_R(self.curve, complex(lam))
                    root = np.sqrt(2 * d / h)
                    tips = [complex(lam + r.real, max(abs(r.imag), 1e-15)) for r in (root, -root)]
                    starts = tips + starts if abs(d) < 1e-2 else starts + tips
        for z0 in starts:
            if z0.imag <= 0:
                continue
            z = self._newton(G, z0, tol, maxiter)
            if z is not None:
                return z
        raise NoConvergence("lambda_of_w did not converge for w=%r" % w)


# ---------------------------------------------------------------------------
# functional interface


def compute_periods(curve: HyperellipticCurve, tol: float = 1e-13) -> SurfaceData:
    return SurfaceData(curve, tol=tol)


def abel_map(data: SurfaceData, p: SurfacePoint) -> np.ndarray:
    """Abel map with base point ``(E_0, 0)``; vector of length g."""
    if data.genus == 0:
        return np.zeros(0, dtype=complex)
    if p.at_infinity:
        return p.sheet * data.abelian_integral_infinity(data.zeta_numer)
    return data.abelian_integral(data.zeta_numer, p.z, sheet=p.sheet)


def third_kind(data: SurfaceData):
    return data.lambdas.copy(), data.a_tilde, data.b_tilde


def quasimomentum(data: SurfaceData, z, lip: int = 1) -> complex:
    return complex(np.exp(data.g(z, lip)))


def lambda_of_w(data: SurfaceData, w, bank: Optional[str] = None) -> complex:
    return data.lambda_of_w(w, bank)


def domega(data: SurfaceData, mus: Sequence[float], w, lam=None) -> complex:
    """Density of ``d omega`` against ``dw``: ``prod (lambda - mu_j)/(lambda - lambda_j) / w``."""
    if lam is None:
        lam = data.lambda_of_w(w)
    num = np.prod([lam - m for m in mus]) if len(mus) else 1.0
    den = np.prod([lam - l for l in data.lambdas]) if data.genus else 1.0
    return complex(num / den / w)
