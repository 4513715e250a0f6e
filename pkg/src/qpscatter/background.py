"""Quasi-periodic finite-gap Jacobi operator and its Baker-Akhiezer branches.

The Dirichlet divisor ``(mu_j(n), sigma_j(n))`` is propagated along ``n`` with
the polynomial identity ``H(z,n)^2 - R(z) = 4 a(n)^2 G(z,n) G(z,n+1)`` where
``G(z,n) = prod (z - mu_j(n))``.  The theta-function representation of the
coefficients is evaluated independently and used as a cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import BranchPoint, InstabilityDetected, InvalidInput, PoleAtMu, ThetaZero
from .surface import SurfaceData, SurfacePoint, abel_map, sqrt_R, theta, theta_grad

_ROOT_SLACK = 1e-9


@dataclass(frozen=True)
class DirichletData:
    mus: tuple
    sigmas: tuple

    def __init__(self, mus: Sequence[float], sigmas: Sequence[int]):
        mus = tuple(float(m) for m in mus)
        sigmas = tuple(int(s) for s in sigmas)
        if len(mus) != len(sigmas):
            raise InvalidInput("mus and sigmas differ in length")
        if any(s not in (1, -1) for s in sigmas):
            raise InvalidInput("sigmas must be +1 or -1")
        object.__setattr__(self, "mus", mus)
        object.__setattr__(self, "sigmas", sigmas)

    def check(self, surface: SurfaceData) -> None:
        cv = surface.curve
        if len(self.mus) != cv.genus:
            raise InvalidInput("need exactly g = %d Dirichlet points" % cv.genus)
        for j, m in enumerate(self.mus, start=1):
            lo, hi = cv.gap(j)
            if not lo < m < hi:
                raise InvalidInput("mu_%d = %g must lie strictly inside gap (%g, %g)" % (j, m, lo, hi))


@dataclass
class _State:
    mus: np.ndarray
    sigmas: np.ndarray
    a: float
    b: float
    G: np.ndarray  # ascending coefficients
    H: np.ndarray


@dataclass(frozen=True)
class CircleRule:
    """Nodes ``(lam_k, lip_k)`` on both lips of every band with real weights ``nu_k``.

    ``(1/2 pi i) oint F(w) d omega(w) = sum_k nu_k F(lam_k + i0 lip_k)``.  With
    ``lam = m + h cos t`` the two lips form one periodic loop in ``t``, so the
    rule converges geometrically for integrands analytic near the bands.
    """

    lam: np.ndarray
    lip: np.ndarray
    nu: np.ndarray
    w: np.ndarray
    nodes_per_band: int
    weight_imag: float

    @classmethod
    def build(cls, op: "BackgroundOperator", n: int) -> "CircleRule":
        from .surface import interval_rule

        sd = op.surface
        lam, lip, nu, w, wim = [], [], [], [], 0.0
        mus = np.asarray(op.dirichlet.mus)
        for l in range(op.genus + 1):
            x, wt = interval_rule(op.curve, 2 * l, n)
            v = wt * (np.prod(np.subtract.outer(x, mus), axis=-1) if mus.size else 1.0) / (2j * np.pi)
            wim = max(wim, float(np.max(np.abs(v.imag))))
            wu = np.array([np.exp(1j * sd.g(xx).imag) for xx in x])
            for sgn in (1, -1):
                lam.append(x)
                lip.append(np.full(n, sgn))
                nu.append(v.real)
                w.append(wu if sgn > 0 else wu.conj())
        return cls(np.concatenate(lam), np.concatenate(lip), np.concatenate(nu), np.concatenate(w), n, wim)

    @property
    def size(self) -> int:
        return self.lam.size


@dataclass
class BAFunction:
    z: complex
    side: int
    n: np.ndarray
    values: np.ndarray


class BackgroundOperator:
    """Finite-gap background ``H_q`` with lazily extended coefficient tables."""

    def __init__(self, surface: SurfaceData, dirichlet: DirichletData, window: int = 60):
        dirichlet.check(surface)
        self.surface = surface
        self.curve = surface.curve
        self.dirichlet = dirichlet
        self.window = int(window)
        self._Rpoly = npoly.polyfromroots(self.curve.E)
        self._half_sum = 0.5 * float(np.sum(self.curve.E))
        s0 = self._make_state(np.array(dirichlet.mus, float), np.array(dirichlet.sigmas, float))
        self._states = {0: s0}
        self._lo = self._hi = 0
        self._ensure(-self.window - 2, self.window + 2)

    # -- recursion ------------------------------------------------------
    @property
    def genus(self) -> int:
        return self.curve.genus

    def _rsqrt_real(self, x):
        return sqrt_R(self.curve, np.asarray(x, float) + 0j).real

    def _make_state(self, mus, sigmas, a=None):
        G = npoly.polyfromroots(mus) if mus.size else np.array([1.0])
        b = self._half_sum - float(mus.sum())
        H = npoly.polymul([-b, 1.0], G)
        rm = self._rsqrt_real(mus) if mus.size else np.zeros(0)
        for k in range(mus.size):
            rest = np.delete(mus, k)
            lag = npoly.polyfromroots(rest) / np.prod(mus[k] - rest)
            H = npoly.polyadd(H, sigmas[k] * rm[k] * lag)
        if a is None:
            a = self._a_from(H, 2 * self.genus)[0]
        return _State(mus, sigmas, a, b, G, H)

    def _a_from(self, Hprev_or_H, deg):
        c = npoly.polysub(npoly.polymul(Hprev_or_H, Hprev_or_H), self._Rpoly)
        c = np.pad(c, (0, max(0, deg + 1 - c.size)))[: deg + 1]  # top terms cancel exactly
        a2 = c[deg] / 4.0
        if not a2 > 0:
            raise InstabilityDetected("non-positive a(n)^2 in Dirichlet recursion")
        return float(np.sqrt(a2)), c

    def _roots_in_gaps(self, P):
        g = self.genus
        if g == 0:
            return np.zeros(0)
        r = npoly.polyroots(P)
        if np.max(np.abs(r.imag)) > 1e-6 * max(1.0, np.max(np.abs(r))):
            raise InstabilityDetected("Dirichlet polynomial acquired complex roots")
        r = np.sort(r.real)
        for j in range(1, g + 1):
            lo, hi = self.curve.gap(j)
            slack = _ROOT_SLACK * (1.0 + abs(lo) + abs(hi))
            if not lo - slack <= r[j - 1] <= hi + slack:
                raise InstabilityDetected("Dirichlet point left gap %d" % j)
            r[j - 1] = min(max(r[j - 1], lo), hi)
        return r

    def _signs(self, P, mus, flip):
        if mus.size == 0:
            return np.zeros(0)
        rm = self._rsqrt_real(mus)
        val = npoly.polyval(mus, P)
        s = np.where(np.abs(rm) > 1e-300, np.sign(flip * val * np.sign(rm)), 1.0)
        s[s == 0] = 1.0
        return s

    def _step_forward(self, st: _State) -> _State:
        a, c = self._a_from(st.H, 2 * self.genus)
        Gn, rem = npoly.polydiv(c / (4 * a * a), st.G)
        mus = self._roots_in_gaps(Gn)
        sig = self._signs(st.H, mus, -1.0)
        return self._make_state(mus, sig)

    def _step_backward(self, st: _State) -> _State:
        Hp = npoly.polysub(2 * npoly.polymul(npoly.polymul([-st.b, 1.0], st.G), [1.0]), st.H)
        a, c = self._a_from(Hp, 2 * self.genus)
        Gp, rem = npoly.polydiv(c / (4 * a * a), st.G)
        mus = self._roots_in_gaps(Gp)
        sig = self._signs(Hp, mus, 1.0)
        return self._make_state(mus, sig, a)

    def _ensure(self, lo, hi):
        while self._hi < hi:
            self._states[self._hi + 1] = self._step_forward(self._states[self._hi])
            self._hi += 1
        while self._lo > lo:
            self._states[self._lo - 1] = self._step_backward(self._states[self._lo])
            self._lo -= 1

    def state(self, n: int) -> _State:
        self._ensure(n - 1, n + 1)
        return self._states[n]

    # -- coefficients ---------------------------------------------------
    def a(self, n):
        n = np.atleast_1d(np.asarray(n, int))
        self._ensure(int(n.min()) - 1, int(n.max()) + 1)
        return np.array([self._states[k].a for k in n])

    def b(self, n):
        n = np.atleast_1d(np.asarray(n, int))
        self._ensure(int(n.min()) - 1, int(n.max()) + 1)
        return np.array([self._states[k].b for k in n])

    @property
    def n_window(self) -> np.ndarray:
        return np.arange(-self.window, self.window + 1)

    @property
    def a_q(self) -> np.ndarray:
        return self.a(self.n_window)

    @property
    def b_q(self) -> np.ndarray:
        return self.b(self.n_window)

    def mu(self, n: int) -> np.ndarray:
        return self.state(n).mus.copy()

    def sigma(self, n: int) -> np.ndarray:
        return self.state(n).sigmas.copy()

    # -- Baker-Akhiezer branches ----------------------------------------
    def _rs(self, z, side, lip):
        r = sqrt_R(self.curve, z)
        lip = np.broadcast_to(np.asarray(lip), np.shape(z))
        return side * np.where(lip < 0, -r, r)

    def phi(self, z, n: int = 0, side: int = 1, lip=1, limit: bool = False):
        """``psi_{q,side}(z, n+1) / psi_{q,side}(z, n)``; vectorized in ``z``.

        Real ``z`` is read on the upper (``lip=1``) or lower (``lip=-1``) lip.
        """
        z = np.asarray(z, dtype=complex)
        if not limit and np.any(np.isin(z, self.curve.E + 0j)):
            raise BranchPoint("z is a band edge; pass limit=True")
        st, nx = self.state(n), self.state(n + 1)
        rs = self._rs(z, side, lip)
        Hz = npoly.polyval(z, st.H)
        p, m = Hz + rs, Hz - rs
        use1 = np.abs(p) >= np.abs(m)
        Gz = npoly.polyval(z, st.G)
        with np.errstate(divide="ignore", invalid="ignore"):
            v1 = p / (2 * st.a * Gz)
            v2 = 2 * st.a * npoly.polyval(z, nx.G) / m
        out = np.where(use1, v1, v2)
        if not np.all(np.isfinite(out)):
            raise PoleAtMu("z hits a Dirichlet pole of the chosen branch")
        return out

    def psi(self, z, n_lo: int, n_hi: int, side: int = 1, lip=1, limit: bool = False) -> np.ndarray:
        """Table ``psi_{q,side}(z, n)`` for ``n_lo <= n <= n_hi``, shape ``z.shape + (n_hi-n_lo+1,)``."""
        z = np.asarray(z, dtype=complex)
        n_lo, n_hi = min(n_lo, 0), max(n_hi, 0)
        out = np.empty(z.shape + (n_hi - n_lo + 1,), dtype=complex)
        out[..., -n_lo] = 1.0
        for n in range(0, n_hi):
            out[..., n + 1 - n_lo] = out[..., n - n_lo] * self.phi(z, n, side, lip, limit)
        for n in range(-1, n_lo - 1, -1):
            out[..., n - n_lo] = out[..., n + 1 - n_lo] / self.phi(z, n, side, lip, limit)
        return out

    def psi_q(self, z, side: int, n_range, lip: int = 1) -> BAFunction:
        n0, n1 = n_range
        tab = self.psi(z, n0, n1, side, lip)
        lo = min(n0, 0)
        return BAFunction(complex(z), side, np.arange(n0, n1 + 1), tab[n0 - lo: n1 - lo + 1])

    def s_q(self, z, n_lo: int, n_hi: int) -> np.ndarray:
        """Fundamental solution with ``s(0)=0``, ``s(1)=1`` on ``[n_lo, n_hi]``."""
        z = complex(z)
        n_lo, n_hi = min(n_lo, 0), max(n_hi, 1)
        s = {0: 0.0 + 0j, 1: 1.0 + 0j}
        for n in range(1, n_hi):
            s[n + 1] = ((z - self.b(n)[0]) * s[n] - self.a(n - 1)[0] * s[n - 1]) / self.a(n)[0]
        for n in range(0, n_lo, -1):
            s[n - 1] = ((z - self.b(n)[0]) * s[n] - self.a(n)[0] * s[n + 1]) / self.a(n - 1)[0]
        return np.array([s[n] for n in range(n_lo, n_hi + 1)])

    def wronskian_q(self, z, lip: int = 1) -> complex:
        """``R^{1/2}(z) / prod (z - mu_j)``, the value of ``W(psi_{q,-}, psi_{q,+})``."""
        num = self._rs(np.asarray(z, complex), 1, lip)
        return num / npoly.polyval(np.asarray(z, complex), self.state(0).G)

    def recurrence_residual(self, u: np.ndarray, z, n_lo: int) -> float:
        """Max relative residual of the background recurrence over interior points of ``u``."""
        n = np.arange(n_lo + 1, n_lo + len(u) - 1)
        a, b, am = self.a(n), self.b(n), self.a(n - 1)
        lhs = a * u[2:] + am * u[:-2] + b * u[1:-1]
        scale = np.abs(a * u[2:]) + np.abs(am * u[:-2]) + np.abs((b - z) * u[1:-1]) + 1e-300
        return float(np.max(np.abs(lhs - z * u[1:-1]) / scale))

    # -- theta representation -------------------------------------------
    def _theta_setup(self):
        if hasattr(self, "_theta_cache"):
            return self._theta_cache
        sd = self.surface
        A_inf = abel_map(sd, SurfacePoint(0j, 1, True))
        alpha = sum(
            (abel_map(sd, SurfacePoint(m, int(s))) for m, s in zip(self.dirichlet.mus, self.dirichlet.sigmas)),
            np.zeros(self.genus, complex),
        )
        z0 = A_inf - alpha - sd.xi
        step = -2.0 * A_inf  # z(n) = z(0) - n * step
        span = np.abs(z0.imag).sum() + (self.window + 3) * np.abs(step.imag).sum() + 2.0
        params = sd.theta_params(imag_norm=float(span))
        self._theta_cache = (A_inf, alpha, z0, step, params)
        return self._theta_cache

    def theta_phase(self, n):
        """``z(n)`` in the theta representation."""
        _, _, z0, step, _ = self._theta_setup()
        n = np.asarray(n, float)
        return z0 - n[..., None] * step

    def theta_coefficients(self, n):
        """``(a_q(n), b_q(n))`` from the theta-function formulas."""
        n = np.atleast_1d(np.asarray(n, int))
        sd = self.surface
        if self.genus == 0:
            return np.full(n.shape, sd.a_tilde), np.full(n.shape, sd.b_tilde)
        params = self._theta_setup()[4]
        ks = np.arange(n.min() - 1, n.max() + 2)
        Z = self.theta_phase(ks)
        th = theta(Z, params)
        if np.any(np.abs(th) < 1e-12):
            raise ThetaZero("theta vanishes on the window")
        dlog = theta_grad(Z, params) / th[:, None]
        i = n - ks[0]
        a2 = sd.a_tilde ** 2 * th[i + 1] * th[i - 1] / th[i] ** 2
        a = np.sqrt(a2.real)
        cg = sd.c[:, self.genus - 1]
        b = sd.b_tilde + (dlog[i] - dlog[i - 1]) @ cg
        return a, b.real

    def psi_theta(self, z, side: int, n):
        """``psi_{q,side}(z, n)`` from the theta/exponential formula (single point).

        The n-dependent constant is fixed by the large-z behaviour
        ``psi_{q,+}(z,n) w^{-n} -> (-1)^n prod_{m<n} a_q(m) / a~^n``.
        """
        sd = self.surface
        z = complex(z)
        n = int(n)
        gz = sd.g(z) * side
        if self.genus == 0:
            return complex((-1) ** n * np.exp(n * gz))
        A_inf, alpha, z0, step, params = self._theta_setup()
        zp = abel_map(sd, SurfacePoint(z, side)) - alpha - sd.xi
        th = theta(self.theta_phase(np.array([n - 1, n, -1, 0])), params)
        const = (-1) ** n * np.sqrt(abs(th[2] * th[1] / (th[0] * th[3]))) * th[3] / th[1]
        ratio = theta(zp - n * step, params) / theta(zp, params)
        return complex(const * ratio * np.exp(n * gz))

    # -- circle quadrature ----------------------------------------------
    def circle_rule(self, nodes_per_band: int = 128) -> "CircleRule":
        """Quadrature for ``(1/2 pi i) oint F d omega`` over ``|w| = 1``."""
        key = int(nodes_per_band)
        cache = self.__dict__.setdefault("_circle_cache", {})
        if key not in cache:
            cache[key] = CircleRule.build(self, key)
        return cache[key]

    # -- reporting ------------------------------------------------------
    def report(self) -> dict:
        n = self.n_window
        return {
            "n": n.tolist(),
            "a_q": self.a(n).tolist(),
            "b_q": self.b(n).tolist(),
            "mus": list(self.dirichlet.mus),
            "sigmas": list(self.dirichlet.sigmas),
            "lambdas": self.surface.lambdas.tolist(),
            "a_tilde": self.surface.a_tilde,
            "b_tilde": self.surface.b_tilde,
        }

    def to_csv(self) -> str:
        lines = ["n,a_q,b_q"]
        for k, a, b in zip(self.n_window, self.a_q, self.b_q):
            lines.append("%d,%r,%r" % (k, float(a), float(b)))
        return "\n".join(lines) + "\n"


def build_background(surface: SurfaceData, dirichlet: DirichletData, window: int = 60) -> BackgroundOperator:
    return BackgroundOperator(surface, dirichlet, window)
