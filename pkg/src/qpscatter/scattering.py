"""Scattering data of a compactly supported perturbation of a finite-gap background.

Circle samples live on the nodes of :class:`~qpscatter.background.CircleRule`,
i.e. on both lips of every band; a node on the upper lip and the node with the
same ``lambda`` on the lower lip are mirror images ``w`` and ``conj(w)``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.optimize import brentq

from .background import BackgroundOperator, CircleRule, DirichletData
from .errors import (
    AmbiguousSlit,
    DegenerateZero,
    GreenSolverFailure,
    InvalidInput,
    NoConvergence,
    RootRefinementFailure,
    SlitAmbiguity,
    UnsupportedPoint,
)
from .jost import Perturbation, PerturbedOperator
from .surface import HyperellipticCurve, SurfaceData, sqrt_R

FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Wronskians and the coefficients alpha, beta


def wronskian(u, v, a, n: int):
    """``a(n) (u(n) v(n+1) - u(n+1) v(n))`` for arrays indexed along the last axis."""
    u, v = np.asarray(u), np.asarray(v)
    return np.asarray(a)[n] * (u[..., n] * v[..., n + 1] - u[..., n + 1] * v[..., n])


def _dirichlet_poly(op_q: BackgroundOperator, sign: Optional[int] = None) -> np.ndarray:
    st = op_q.state(0)
    if sign is None or st.mus.size == 0:
        return st.G if sign is None else np.array([1.0])
    return npoly.polyfromroots(st.mus[st.sigmas == sign]) if np.any(st.sigmas == sign) else np.array([1.0])


def _ref_index(P: PerturbedOperator) -> int:
    return P.n_plus


def wtilde(P: PerturbedOperator, z, lip=1, n: Optional[int] = None) -> np.ndarray:
    """``prod (z - mu_j) W(psi_-, psi_+)(z)``; analytic off the spectrum, real on the real axis."""
    z = np.asarray(z, dtype=complex)
    n = _ref_index(P) if n is None else n
    tm = P.jost_table(z, -1, n, n + 1, lip)
    tp = P.jost_table(z, 1, n, n + 1, lip)
    W = P.a(n)[0] * (tm[..., 0] * tp[..., 1] - tm[..., 1] * tp[..., 0])
    return npoly.polyval(z, _dirichlet_poly(P.q)) * W


def _alpha_beta_nodes(P: PerturbedOperator, lam, lip, n: Optional[int] = None):
    lam = np.asarray(lam, dtype=complex)
    lip = np.broadcast_to(np.asarray(lip), lam.shape)
    n = _ref_index(P) if n is None else n
    a = P.a(n)[0]
    tm = P.jost_table(lam, -1, n, n + 1, lip)
    tp = P.jost_table(lam, 1, n, n + 1, lip)
    tmc = P.jost_table(lam, -1, n, n + 1, -lip)
    tpc = P.jost_table(lam, 1, n, n + 1, -lip)

    def W(u, v):
        return a * (u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0])

    fac = npoly.polyval(lam, _dirichlet_poly(P.q)) / P.q._rs(lam, 1, lip)
    alpha = fac * W(tm, tp)
    beta_p = -fac * W(tm, tpc)
    beta_m = fac * W(tp, tmc)
    return alpha, beta_p, beta_m


def alpha_beta(op_q: BackgroundOperator, pert: Perturbation, w, bank: Optional[str] = None):
    """``(alpha, beta_+, beta_-)`` at points ``w`` of the closed unit disc.

    On the circle the spectral parameter is read on the upper lip for
    ``Im w > 0`` and on the lower lip for ``Im w < 0``; inside the disc
    ``beta`` is not defined and returned as ``nan``.
    """
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    P = PerturbedOperator(op_q, pert)
    sd = op_q.surface
    out = np.empty((3,) + w.shape, dtype=complex)
    for idx, wk in np.ndenumerate(w):
        if np.any(np.isclose(wk, sd.edge_images, rtol=0, atol=1e-14)):
            raise UnsupportedPoint("w is a band-edge image")
        try:
            lam = sd.lambda_of_w(wk, bank)
        except AmbiguousSlit as exc:
            raise SlitAmbiguity(str(exc)) from exc
        if abs(abs(wk) - 1) <= 1e-13:
            lip = 1 if wk.imag > 0 else -1
            a, bp, bm = _alpha_beta_nodes(P, np.array([lam.real]), np.array([lip]))
            out[(slice(None),) + idx] = a[0], bp[0], bm[0]
        else:
            a = wtilde(P, np.array([lam]), 1) / op_q._rs(np.array([lam]), 1, 1)
            out[(slice(None),) + idx] = a[0], np.nan, np.nan
    return out[0], out[1], out[2]


# ---------------------------------------------------------------------------
# bound states


@dataclass
class BoundState:
    rho: float
    gamma_plus: float
    gamma_minus: float
    coupling: float  # psi^_+ = coupling * psi^_-
    alpha_prime: float = float("nan")
    w: complex = complex("nan")
    terms: int = 0

    @property
    def residue(self) -> float:
        return 1.0 / self.alpha_prime

    def to_dict(self) -> dict:
        return {"rho": self.rho, "gamma_plus": self.gamma_plus, "gamma_minus": self.gamma_minus,
                "coupling": self.coupling, "alpha_prime": self.alpha_prime,
                "w_re": float(np.real(self.w)), "w_im": float(np.imag(self.w))}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundState":
        return cls(float(d["rho"]), float(d["gamma_plus"]), float(d["gamma_minus"]), float(d["coupling"]),
                   float(d.get("alpha_prime", "nan")),
                   complex(float(d.get("w_re", "nan")), float(d.get("w_im", "nan"))))


def search_radius(op_q: BackgroundOperator, pert: Perturbation) -> float:
    E = op_q.curve.E
    n = np.array([s[0] for s in pert.sites], int)
    size = float(np.sum(np.abs(pert.da(n))) + np.sum(np.abs(pert.db(n)))) if n.size else 0.0
    return float(np.max(np.abs(E)) + 2.0 * size + 1.0)


def _resolvent_intervals(op_q: BackgroundOperator, radius: float):
    E = op_q.curve.E
    out = [(-radius, E[0])]
    out += [op_q.curve.gap(j) for j in range(1, op_q.genus + 1)]
    out.append((E[-1], radius))
    return out


def _squared_sum(table: np.ndarray) -> float:
    return float(np.sum(np.abs(table) ** 2))


def _tail_norm(op_q: BackgroundOperator, rho: float, side: int, start: int, tol: float, max_terms: int):
    """``sum_{side*(m-start) >= 0} psi_{q,side}(rho, m)^2`` normalised so ``psi(start) = 1``."""
    M = 256
    while True:
        if side > 0:
            tab = op_q.psi(rho + 0j, start, start + M, 1)
            lo = min(start, 0)
            seg = tab[start - lo:].real
        else:
            tab = op_q.psi(rho + 0j, start - M, start, -1)
            lo = min(start - M, 0)
            seg = tab[: start - lo + 1].real[::-1]
        seg = seg / seg[0]
        sq = seg * seg
        total = float(sq.sum())
        if sq[-1] < tol * total and np.max(sq[-8:]) < tol * total:
            return total, M
        if M >= max_terms:
            raise NoConvergence("eigenfunction tail not summable within %d terms" % max_terms)
        M *= 2


def _norming(P: PerturbedOperator, rho: float, tol: float = 1e-14, max_terms: int = 1 << 17):
    op_q = P.q
    lo, hi = P.n_minus, P.n_plus
    z = np.array([rho + 0j])
    dp = npoly.polyval(rho, _dirichlet_poly(op_q, 1))
    dm = npoly.polyval(rho, _dirichlet_poly(op_q, -1))
    hp = dp * P.jost_table(z, 1, lo, hi, 1)[0].real
    hm = dm * P.jost_table(z, -1, lo, hi, 1)[0].real
    k = int(np.argmax(np.abs(hm)))
    coupling = hp[k] / hm[k]
    # psi^_+ on [lo, hi]; the right tail starts at hi, the left tail at lo (both stored with value at the seam)
    right, nr = _tail_norm(op_q, rho, 1, hi, tol, max_terms)
    left, nl = _tail_norm(op_q, rho, -1, lo, tol, max_terms)
    mid = float(np.sum(hp[1:-1] ** 2)) if hi - lo >= 2 else 0.0
    norm_plus = mid + hp[-1] ** 2 * right + (coupling * hm[0]) ** 2 * left
    mismatch = float(np.max(np.abs(hp - coupling * hm)) / np.max(np.abs(hp)))
    return 1.0 / norm_plus, coupling, mismatch, nr + nl + (hi - lo - 1)


def _wtilde_derivative(P: PerturbedOperator, rho: float, nodes: int = 32) -> float:
    E = P.q.curve.E
    d = float(np.min(np.abs(E - rho)))
    r = min(0.25 * d, 0.5)
    th = 2 * np.pi * np.arange(nodes) / nodes
    z = rho + r * np.exp(1j * th)
    vals = wtilde(P, z, 1)
    return float((np.mean(vals * np.exp(-1j * th)) / r).real)


def find_bound_states(op_q: BackgroundOperator, pert: Perturbation, samples: int = 400,
                      tol: float = 1e-14) -> List[BoundState]:
    """Eigenvalues of the perturbed operator outside the background spectrum with norming constants."""
    if pert.is_zero:
        return []
    P = PerturbedOperator(op_q, pert)
    sd = op_q.surface
    radius = search_radius(op_q, pert)
    roots = []
    for a, b in _resolvent_intervals(op_q, radius):
        k = np.arange(1, samples)
        x = a + (b - a) * 0.5 * (1 - np.cos(np.pi * k / samples))
        f = wtilde(P, x + 0j, 1).real
        s = np.sign(f)
        for i in np.nonzero(s[:-1] * s[1:] < 0)[0]:
            fun = lambda t: float(wtilde(P, np.array([t + 0j]), 1)[0].real)
            try:
                roots.append(brentq(fun, x[i], x[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200))
            except (ValueError, RuntimeError) as exc:
                raise RootRefinementFailure("bisection failed near %.6g" % x[i]) from exc
    states = []
    for rho in sorted(roots):
        dW = _wtilde_derivative(P, rho)
        rs = float(sqrt_R(op_q.curve, rho + 0j).real)
        if abs(dW) < 1e-12 * max(1.0, abs(rs)):
            raise DegenerateZero("Wronskian has a multiple zero at %.6g" % rho)
        gp, coupling, mismatch, terms = _norming(P, rho, tol)
        states.append(BoundState(float(rho), float(gp), float(gp * coupling ** 2), float(coupling),
                                 alpha_prime=dW / rs, w=complex(np.exp(sd.g(rho))),
                                 terms=terms))
    return states


def dense_bound_states(op_q: BackgroundOperator, pert: Perturbation, size: int = 400,
                       localisation: float = 0.5, gap_tol: float = 1e-9) -> np.ndarray:
    """Eigenvalues outside the bands of the truncated perturbed matrix whose eigenvectors live in the middle half."""
    P = PerturbedOperator(op_q, pert)
    n = np.arange(-size // 2, size - size // 2)
    a, b = P.a(n[:-1]), P.b(n)
    H = np.diag(b) + np.diag(a, 1) + np.diag(a, -1)
    vals, vecs = np.linalg.eigh(H)
    E = op_q.curve.E
    keep = []
    central = np.abs(n) <= size // 4
    for v, vec in zip(vals, vecs.T):
        if op_q.curve.in_spectrum(v) or np.min(np.abs(E - v)) < gap_tol:
            continue
        if np.sum(vec[central] ** 2) >= localisation:
            keep.append(v)
    return np.array(keep)


# ---------------------------------------------------------------------------
# scattering data


@dataclass
class ScatteringData:
    edges: tuple
    mus: tuple
    sigmas: tuple
    window: int
    nodes_per_band: int
    lam: np.ndarray
    lip: np.ndarray
    w: np.ndarray
    T: np.ndarray
    R_plus: np.ndarray
    R_minus: np.ndarray
    bound_states: List[BoundState]
    T0: float
    diagnostics: dict = field(default_factory=dict)
    sides: tuple = (1, -1)

    @property
    def genus(self) -> int:
        return len(self.edges) // 2 - 1

    def background(self) -> BackgroundOperator:
        return _background(tuple(self.edges), tuple(self.mus), tuple(self.sigmas), int(self.window))

    def partner(self) -> np.ndarray:
        """Index of the node carrying ``conj(w)`` for every node."""
        N = self.nodes_per_band
        idx = np.arange(self.lam.size)
        blk, pos = divmod(idx, N)
        return np.where(blk % 2 == 0, idx + N, idx - N)

    def copy(self) -> "ScatteringData":
        return ScatteringData(tuple(self.edges), tuple(self.mus), tuple(self.sigmas), self.window, self.nodes_per_band,
                              self.lam.copy(), self.lip.copy(), self.w.copy(), self.T.copy(), self.R_plus.copy(),
                              self.R_minus.copy(), [BoundState(**vars(b)) for b in self.bound_states], self.T0,
                              dict(self.diagnostics), self.sides)

    # -- interchange file ---------------------------------------------------
    def header(self) -> dict:
        return {
            "format": "qpscatter-scattering-data",
            "version": FORMAT_VERSION,
            "edges": [float(e) for e in self.edges],
            "dirichlet": {"mus": [float(m) for m in self.mus], "sigmas": [int(s) for s in self.sigmas]},
            "window": int(self.window),
            "grid": {"nodes_per_band": int(self.nodes_per_band), "nodes": int(self.lam.size)},
            "T0": float(self.T0),
            "bound_states": [b.to_dict() for b in self.bound_states],
        }

    def dumps(self) -> str:
        buf = io.StringIO()
        buf.write(json.dumps(self.header(), sort_keys=True) + "\n")
        buf.write("w_re,w_im,lam,lip,T_re,T_im,Rp_re,Rp_im,Rm_re,Rm_im\n")
        for k in range(self.lam.size):
            buf.write(",".join(repr(float(v)) if not isinstance(v, (int, np.integer)) else str(int(v)) for v in (
                self.w[k].real, self.w[k].imag, self.lam[k], int(self.lip[k]), self.T[k].real, self.T[k].imag,
                self.R_plus[k].real, self.R_plus[k].imag, self.R_minus[k].real, self.R_minus[k].imag)) + "\n")
        return buf.getvalue()

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "ScatteringData":
        lines = text.splitlines()
        if len(lines) < 2:
            raise InvalidInput("scattering data file is truncated")
        try:
            head = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise InvalidInput("first line must be a JSON header") from exc
        if head.get("format") != "qpscatter-scattering-data":
            raise InvalidInput("not a scattering data file")
        for key in ("edges", "dirichlet", "window", "grid", "T0", "bound_states"):
            if key not in head:
                raise InvalidInput("header misses %r" % key)
        cols = lines[1].split(",")
        body = np.array([[float(v) for v in ln.split(",")] for ln in lines[2:] if ln.strip()])
        if body.ndim != 2 or body.shape[1] != len(cols):
            raise InvalidInput("malformed CSV body")
        c = {name: body[:, i] for i, name in enumerate(cols)}
        npb = int(head["grid"]["nodes_per_band"])
        g = len(head["edges"]) // 2 - 1
        if body.shape[0] != 2 * (g + 1) * npb:
            raise InvalidInput("node count does not match the grid header")
        return cls(
            tuple(head["edges"]), tuple(head["dirichlet"]["mus"]), tuple(int(s) for s in head["dirichlet"]["sigmas"]),
            int(head["window"]), npb, c["lam"], c["lip"].astype(int), c["w_re"] + 1j * c["w_im"],
            c["T_re"] + 1j * c["T_im"], c["Rp_re"] + 1j * c["Rp_im"], c["Rm_re"] + 1j * c["Rm_im"],
            [BoundState.from_dict(b) for b in head["bound_states"]], float(head["T0"]))

    @classmethod
    def read(cls, path) -> "ScatteringData":
        with open(path) as fh:
            return cls.loads(fh.read())


@lru_cache(maxsize=16)
def _background(edges, mus, sigmas, window) -> BackgroundOperator:
    sd = _surface(edges)
    return BackgroundOperator(sd, DirichletData(mus, sigmas), window)


@lru_cache(maxsize=64)
def _surface(edges) -> SurfaceData:
    return SurfaceData(HyperellipticCurve(edges))


def nodes_per_band_for(genus: int, grid: int) -> int:
    if grid % (2 * (genus + 1)):
        raise InvalidInput("grid size must be a multiple of 2(g+1) = %d" % (2 * (genus + 1)))
    return grid // (2 * (genus + 1))


def scattering_data(op_q: BackgroundOperator, pert: Perturbation, grid: Optional[int] = None,
                    nodes_per_band: Optional[int] = None, bound_states: Optional[List[BoundState]] = None,
                    wronskian_span: int = 10) -> ScatteringData:
    """Sample ``T = 1/alpha`` and ``R_pm = beta_pm/alpha`` on the circle nodes; find bound states."""
    if nodes_per_band is None:
        nodes_per_band = 256 if grid is None else nodes_per_band_for(op_q.genus, grid)
    rule = op_q.circle_rule(nodes_per_band)
    P = PerturbedOperator(op_q, pert)
    alpha, bp, bm = _alpha_beta_nodes(P, rule.lam + 0j, rule.lip)
    T, Rp, Rm = 1.0 / alpha, bp / alpha, bm / alpha
    if bound_states is None:
        bound_states = find_bound_states(op_q, pert)
    T0 = 1.0 / P.A(0, 1) / P.A(0, -1) if not pert.is_zero else 1.0
    data = ScatteringData(tuple(op_q.curve.edges), tuple(float(m) for m in op_q.dirichlet.mus),
                          tuple(int(s) for s in op_q.dirichlet.sigmas), op_q.window, nodes_per_band,
                          rule.lam.copy(), rule.lip.copy(), rule.w.copy(), T, Rp, Rm, bound_states, float(T0))
    data.diagnostics = forward_invariants(data, P, alpha, bp, bm, wronskian_span)
    return data


def forward_invariants(data: ScatteringData, P: PerturbedOperator, alpha, bp, bm, span: int = 10) -> dict:
    T, Rp, Rm = data.T, data.R_plus, data.R_minus
    k = data.partner()
    lam, lip = data.lam + 0j, data.lip
    ws = []
    for n in range(-span, span + 1):
        tm = P.jost_table(lam, -1, n, n + 1, lip)
        tp = P.jost_table(lam, 1, n, n + 1, lip)
        ws.append(P.a(n)[0] * (tm[:, 0] * tp[:, 1] - tm[:, 1] * tp[:, 0]))
    ws = np.array(ws)
    spread = float(np.max(np.abs(ws - ws[span]) / np.abs(ws[span])))
    bs = data.bound_states
    return {
        "unitarity_plus": float(np.max(np.abs(np.abs(T) ** 2 + np.abs(Rp) ** 2 - 1))),
        "unitarity_minus": float(np.max(np.abs(np.abs(T) ** 2 + np.abs(Rm) ** 2 - 1))),
        "plucker": float(np.max(np.abs(np.abs(alpha) ** 2 - np.abs(bp) ** 2 - 1))),
        "conjugation": float(max(np.max(np.abs(np.conj(T) - T[k])), np.max(np.abs(np.conj(Rp) - Rp[k])),
                                 np.max(np.abs(np.conj(Rm) - Rm[k])))),
        "consistency": float(np.max(np.abs(T * Rp[k] + T[k] * Rm))),
        "wronskian_spread": spread,
        "gamma_identity": [float(abs(b.gamma_plus * b.gamma_minus * b.alpha_prime ** 2
                                     * P.q.curve.R(b.rho).real - 1)) for b in bs],
        "bound_states": len(bs),
    }


def band_edge_limit(op_q: BackgroundOperator, pert: Perturbation, edge: int, side: int = 1,
                    offsets=tuple(10.0 ** -k for k in range(2, 11))) -> np.ndarray:
    """``|R^{1/2} (R_side + 1) / T|`` approaching ``E_edge`` from inside its band along the upper lip."""
    E = op_q.curve.E
    inward = 1.0 if edge % 2 == 0 else -1.0
    width = E[edge + 1] - E[edge] if edge % 2 == 0 else E[edge] - E[edge - 1]
    lam = E[edge] + inward * width * np.asarray(offsets)
    P = PerturbedOperator(op_q, pert)
    alpha, bp, bm = _alpha_beta_nodes(P, lam + 0j, np.ones(lam.size, int))
    R = (bp if side > 0 else bm) / alpha
    rs = op_q._rs(lam + 0j, 1, 1)
    return np.abs(rs * (R + 1) * alpha)


# ---------------------------------------------------------------------------
# band integrals with logarithmic edge behaviour


def _log_weights(M: int, s: float) -> np.ndarray:
    """Weights for ``int_0^{2pi} ln|2 sin((t-s)/2)| f(t) dt`` on the midpoint grid of ``M`` nodes."""
    t = (np.arange(M) + 0.5) * 2 * np.pi / M
    m = np.arange(1, M // 2)
    d = s - t
    w = -(2 * np.pi / M) * (np.cos(np.outer(d, m)) / m).sum(axis=1)
    return w - (2 * np.pi / M ** 2) * np.cos(0.5 * M * d)


@dataclass(frozen=True)
class _BandGrid:
    """Periodic view of one band: upper lip for ``t`` in ``(0, pi)``, lower lip reversed after it."""

    index: np.ndarray  # node indices in periodic order
    t: np.ndarray
    x: np.ndarray
    left: float
    right: float

    @property
    def jac(self) -> np.ndarray:
        """``|dx/dt| = sqrt((x - E_left)(E_right - x))``."""
        return np.sqrt(np.abs((self.x - self.left) * (self.right - self.x)))


def _band_grids(data: "ScatteringData") -> List[_BandGrid]:
    N = data.nodes_per_band
    E = np.asarray(data.edges, float)
    out = []
    for l in range(data.genus + 1):
        up = np.arange(2 * l * N, 2 * l * N + N)
        lo = up + N
        idx = np.concatenate([up, lo[::-1]])
        t = (np.arange(2 * N) + 0.5) * np.pi / N
        out.append(_BandGrid(idx, t, data.lam[idx], E[2 * l], E[2 * l + 1]))
    return out


def _edge_orders(h: np.ndarray, t: np.ndarray) -> tuple:
    """Detect ``h ~ ln|sin(t/2)|`` (right edge) and ``h ~ ln|cos(t/2)|`` (left edge) behaviour."""
    M = t.size
    orders = []
    for i, j, f in ((0, 1, np.sin), (M // 2 - 1, M // 2 - 2, np.cos)):
        ref = np.log(abs(f(t[i] / 2)) / abs(f(t[j] / 2)))
        d = h[i] - h[j]
        orders.append(1 if np.isfinite(d) and d / ref > 0.5 else 0)
    return tuple(orders)


def _band_integral(h: np.ndarray, weight: np.ndarray, grid: _BandGrid, orders=None):
    """``int_0^{2pi} h(t) weight(t) dt`` for smooth ``weight`` and ``h`` with log edge singularities."""
    kR, kL = _edge_orders(h, grid.t) if orders is None else orders
    M = grid.t.size
    sing = kR * np.log(np.abs(2 * np.sin(grid.t / 2))) + kL * np.log(np.abs(2 * np.cos(grid.t / 2)))
    total = (2 * np.pi / M) * np.sum((h - sing) * weight)
    if kR:
        total = total + _log_weights(M, 0.0) @ weight
    if kL:
        total = total + _log_weights(M, np.pi) @ weight
    return total


def _log_modulus(data: "ScatteringData") -> np.ndarray:
    """``ln|T|`` on the nodes, i.e. ``(1/2) ln(1 - |R|^2)`` for unitary data."""
    with np.errstate(divide="ignore"):
        return np.log(np.abs(data.T))


# ---------------------------------------------------------------------------
# harmonic measure and Green's function of the resolvent set


@lru_cache(maxsize=256)
def _moebius_surface(edges: tuple, z0: float) -> SurfaceData:
    E = np.asarray(edges, float)
    return SurfaceData(HyperellipticCurve(tuple(np.sort(1.0 / (E - z0)))))


def _equilibrium_density(sd: SurfaceData, x):
    """Density of the equilibrium measure of the spectrum (both lips together)."""
    x = np.asarray(x, float)
    return np.abs(npoly.polyval(x, sd.omega_numer) / sqrt_R(sd.curve, x + 0j)) / np.pi


class ResolventGreen:
    """Green's function and harmonic measure of the complement of the spectrum for real poles.

    The slit disc and the upper sheet are conformally equivalent, so both
    objects are computed in the spectral plane.  A real pole ``z0`` is sent
    to infinity by ``zeta = 1/(x - z0)``, which maps the bands onto another
    finite union of intervals; there the Green's function with pole at
    infinity is ``-Re g`` and the harmonic measure is the equilibrium measure.
    """

    def __init__(self, edges: Sequence[float]):
        self.edges = tuple(float(e) for e in edges)
        self.E = np.asarray(self.edges)
        self.surface = _surface(self.edges)

    def _check(self, z0):
        if z0 is not None and (HyperellipticCurve(self.edges).in_spectrum(z0) or np.min(np.abs(self.E - z0)) == 0):
            raise GreenSolverFailure("pole %.6g lies on the spectrum" % z0)

    def green(self, z, z0: Optional[float]) -> float:
        """``G(z, z0)`` for real ``z`` off the spectrum; ``z0=None`` is the pole at infinity."""
        self._check(z0)
        if z0 is None:
            return float(-self.surface.g(z).real)
        if z == z0:
            return float("inf")
        sd = _moebius_surface(self.edges, float(z0))
        return float(-sd.g(1.0 / (z - z0)).real)

    def robin(self, z0: float) -> float:
        """``lim (G(z, z0) + ln|z - z0|)``."""
        self._check(z0)
        return float(-np.log(_moebius_surface(self.edges, float(z0)).a_tilde))

    def density(self, x, z0: Optional[float]):
        """Harmonic measure density at ``z0`` (both lips together) on band points ``x``."""
        self._check(z0)
        x = np.asarray(x, float)
        if z0 is None:
            return _equilibrium_density(self.surface, x)
        sd = _moebius_surface(self.edges, float(z0))
        return _equilibrium_density(sd, 1.0 / (x - z0)) / (x - z0) ** 2


def _harmonic_extension(data: "ScatteringData", green: ResolventGreen, h: np.ndarray, z0: Optional[float]) -> float:
    total = 0.0
    for grid in _band_grids(data):
        wgt = 0.5 * green.density(grid.x, z0) * grid.jac
        total += _band_integral(h[grid.index], wgt, grid)
    return float(total)


# ---------------------------------------------------------------------------
# Poisson-Jensen reconstruction of T


def _disc_T(data: "ScatteringData", w: complex, h: np.ndarray) -> complex:
    wb = np.array([b.w for b in data.bound_states], dtype=complex)
    blaschke = np.prod((1 - np.conj(wb) * w) / (w - wb)) if wb.size else 1.0
    at0 = np.prod(1.0 / (-wb)) if wb.size else 1.0
    (grid,) = _band_grids(data)
    kern = (data.w[grid.index] + w) / (data.w[grid.index] - w)
    outer = _band_integral(h[grid.index], kern / (2 * np.pi), grid)
    phase = np.conj(at0) / abs(at0)
    return complex(blaschke * phase * np.exp(outer))


def poisson_jensen_T(data: "ScatteringData", surface: Optional[SurfaceData] = None, w=None,
                     bank: Optional[str] = None, z: Optional[float] = None) -> complex:
    """Rebuild ``T`` from ``|T|`` on the circle and the bound states.

    Genus zero: any ``w`` in the open disc (closed-form Green's function and
    Poisson kernel).  Higher genus: points whose spectral parameter is real,
    i.e. the real segments and the slits of the slit disc; pass ``z`` directly
    or ``w`` with ``bank`` on a slit.  The modulus is returned with the sign
    fixed by ``T(infinity) > 0`` on the outer intervals and by the phase
    accumulated around the bands inside gaps.
    """
    sd = surface if surface is not None else _surface(tuple(data.edges))
    h = _log_modulus(data)
    if data.genus == 0 and w is not None:
        if abs(w) >= 1:
            raise InvalidInput("w must lie inside the unit disc")
        return _disc_T(data, complex(w), h)
    if z is None:
        try:
            z = sd.lambda_of_w(complex(w), bank)
        except AmbiguousSlit as exc:
            raise SlitAmbiguity(str(exc)) from exc
        if abs(z.imag) > 1e-10:
            raise UnsupportedPoint("higher genus reconstruction needs a real spectral parameter")
        z = z.real
    return _real_T(data, float(z), h)


def _real_T(data: "ScatteringData", z: float, h: np.ndarray) -> float:
    green = ResolventGreen(data.edges)
    logmod = _harmonic_extension(data, green, h, z)
    logmod += sum(green.green(z, b.rho) for b in data.bound_states)
    mod = float(np.exp(logmod))
    return mod * _real_sign(data, green, h, z)


def _real_sign(data: "ScatteringData", green: ResolventGreen, h: np.ndarray, z: float) -> float:
    E = green.E
    poles = np.array([b.rho for b in data.bound_states])
    if z > E[-1]:
        return float((-1) ** int(np.sum(poles > z)))
    if z < E[0]:
        return float((-1) ** int(np.sum(poles < z)))
    j = int(np.searchsorted(E, z) // 2)
    q = conjugate_periods(data, green, h)[j - 1]
    return float((-1) ** (int(round(q)) - int(np.sum(poles < z))))


def residue_modulus(data: "ScatteringData", bound: BoundState, h: Optional[np.ndarray] = None) -> float:
    """``|Res_rho T|`` from the Poisson-Jensen representation."""
    green = ResolventGreen(data.edges)
    h = _log_modulus(data) if h is None else h
    val = green.robin(bound.rho) + _harmonic_extension(data, green, h, bound.rho)
    val += sum(green.green(bound.rho, b.rho) for b in data.bound_states if b is not bound)
    return float(np.exp(val))


def band_harmonic_measure(sd: SurfaceData, j: int):
    """Coefficients ``P`` with ``omega(z) = 1 + Re int_{E_0}^z P(x) dx / R^{1/2}``: harmonic measure of bands ``0..j-1``."""
    g = sd.genus
    L = np.cumsum(sd.C.T / 2.0, axis=0)  # L[k-1, p] = sum_{i<=k} int_{gap i} x^p / R^{1/2}
    rhs = -(np.arange(1, g + 1) >= j).astype(float)
    return np.linalg.solve(L, rhs)


def conjugate_periods(data: "ScatteringData", green: Optional[ResolventGreen] = None,
                      h: Optional[np.ndarray] = None) -> np.ndarray:
    """``(1/2pi)`` times the flux of ``ln|T|`` out of bands ``0..j-1`` for every gap ``j``.

    On gap ``j`` one has ``arg T(x + i0) = -pi (Q_j - #{rho < x})``, so ``T``
    is single valued (real on the gaps) exactly when every ``Q_j`` is an integer.
    """
    green = ResolventGreen(data.edges) if green is None else green
    h = _log_modulus(data) if h is None else h
    sd = green.surface
    out = []
    for j in range(1, data.genus + 1):
        Pj = band_harmonic_measure(sd, j)
        flux = 0.0
        for grid in _band_grids(data):
            dens = -(npoly.polyval(grid.x, Pj) / sqrt_R(sd.curve, grid.x + 0j)).imag
            flux += _band_integral(h[grid.index], dens * grid.jac / (2 * np.pi), grid)
        om = sum(1.0 + sd.abelian_integral(Pj, b.rho)[0].real for b in data.bound_states)
        out.append(float(flux + om))
    return np.array(out)


# ---------------------------------------------------------------------------
# Fourier coefficients of the reflection coefficients


def background_table(op_q: BackgroundOperator, lam, lip, side: int, n_lo: int, n_hi: int) -> np.ndarray:
    """``psi_{q,side}(lam_k, n)`` for ``n_lo <= n <= n_hi``; shape ``(nodes, n_hi - n_lo + 1)``."""
    tab = op_q.psi(np.asarray(lam) + 0j, n_lo, n_hi, side, lip)
    lo = min(n_lo, 0)
    return tab[:, n_lo - lo: n_hi - lo + 1]


def _rule_for(data: "ScatteringData", op_q: BackgroundOperator) -> CircleRule:
    rule = op_q.circle_rule(data.nodes_per_band)
    if rule.size != data.lam.size or np.max(np.abs(rule.lam - data.lam)) > 1e-12 or np.any(rule.lip != data.lip):
        raise InvalidInput("circle nodes of the data do not match the background quadrature")
    return rule


def reflection_fourier(data: "ScatteringData", op_q: BackgroundOperator, side: int, n_lo: int, n_hi: int):
    """``(1/2 pi i) oint R_side psi_{q,side}(l) psi_{q,side}(m) d omega`` for ``n_lo <= l, m <= n_hi``.

    Returns the real part and the largest imaginary part.
    """
    rule = _rule_for(data, op_q)
    R = data.R_plus if side > 0 else data.R_minus
    psi = background_table(op_q, rule.lam, rule.lip, side, n_lo, n_hi)
    F = (rule.nu[:, None] * R[:, None] * psi).T @ psi
    return F.real, float(np.max(np.abs(F.imag), initial=0.0))


def _geometric_tail(terms: np.ndarray, floor: float = 1e-13):
    """Fit ``terms ~ C r^k`` on the outer half; returns ``(r, remainder_estimate)``."""
    terms = np.abs(np.asarray(terms, float))
    terms = np.maximum.accumulate(terms[::-1])[::-1]  # monotone envelope
    tail = terms[terms.size // 2:]
    if tail.size < 3 or np.max(tail) <= floor:
        return 0.0, float(np.max(tail, initial=0.0))
    good = tail > floor
    k = np.arange(tail.size)[good]
    if k.size < 3:
        return 0.0, float(np.max(tail))
    slope = np.polyfit(k, np.log(tail[good]), 1)[0]
    r = float(np.exp(slope))
    rem = float(tail[-1] * r / (1 - r)) if r < 1 else float("inf")
    return r, rem


# ---------------------------------------------------------------------------
# validation against the admissibility conditions


@dataclass
class ValidationReport:
    clauses: dict
    details: dict

    @property
    def passed(self) -> bool:
        return all(self.clauses.values())

    def failed(self) -> list:
        return [k for k, v in self.clauses.items() if not v]

    def to_dict(self) -> dict:
        return {"clauses": {k: bool(v) for k, v in self.clauses.items()}, "details": self.details}


def validate_scattering_data(data: "ScatteringData", surface: Optional[SurfaceData] = None,
                             op_q: Optional[BackgroundOperator] = None, tol_symmetry: float = 1e-8,
                             tol_consistency: float = 1e-8, tol_gamma: float = 1e-6,
                             tol_period: float = 1e-6, window: int = 60) -> ValidationReport:
    """Check the admissibility clauses (i)-(iv) and report per clause."""
    op_q = data.background() if op_q is None else op_q
    sd = surface if surface is not None else op_q.surface
    curve = sd.curve
    k = data.partner()
    det = {}
    ok = {}

    # (i) symmetry, |R| < 1, lower bound, Fourier decay
    sym = float(max(np.max(np.abs(np.conj(data.R_plus) - data.R_plus[k])),
                    np.max(np.abs(np.conj(data.R_minus) - data.R_minus[k]))))
    rmax = float(max(np.max(np.abs(data.R_plus)), np.max(np.abs(data.R_minus))))
    wl = sd.edge_images
    dist = np.prod(np.abs(data.w[:, None] - np.concatenate([wl, np.conj(wl)])[None, :]), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lower = float(min(np.min((1 - np.abs(data.R_plus) ** 2) / dist ** 2),
                          np.min((1 - np.abs(data.R_minus) ** 2) / dist ** 2)))
    fourier = {}
    fourier_ok = True
    for side in (1, -1):
        n_lo, n_hi = (0, window) if side > 0 else (-window, 0)
        F, _ = reflection_fourier(data, op_q, side, n_lo, n_hi)
        idx = np.arange(n_lo, n_hi + 1)
        aq = op_q.a(np.arange(n_lo - 1, n_hi + 1))[1:]
        if side < 0:  # order every sequence from n = 0 outwards
            F, idx = F[::-1, ::-1], idx[::-1]
            aq = op_q.a(idx - 1)
        else:
            aq = op_q.a(idx)
        diag = np.diag(F)
        d1 = np.abs(idx[:-1]) * np.abs(diag[:-1] - diag[1:])
        # a_q(n) F(n, n+1) - a_q(n-1) F(n-1, n) along the outward direction
        off = np.abs(aq[1:-1] * F[np.arange(1, F.shape[0] - 1), np.arange(2, F.shape[0])]
                     - aq[:-2] * F[np.arange(0, F.shape[0] - 2), np.arange(1, F.shape[0] - 1)])
        d2 = np.abs(idx[1:-1]) * off
        s = np.add.outer(np.arange(F.shape[0]), np.arange(F.shape[0]))
        env = np.array([np.max(np.abs(F[s == v])) for v in range(F.shape[0])])
        fits = [_geometric_tail(x) for x in (env, d1, d2)]
        fourier[side] = {"decay_ratio": [f[0] for f in fits], "remainder": [f[1] for f in fits],
                         "diag_sum": float(d1.sum()), "offdiag_sum": float(d2.sum())}
        fourier_ok &= all(np.isfinite(f[1]) for f in fits)
    det["i"] = {"symmetry": sym, "max_abs_R": rmax, "lower_bound_constant": lower, "fourier": fourier}
    ok["i"] = bool(sym < tol_symmetry and rmax < 1 and lower > 0 and fourier_ok)

    # (ii) eigenvalues and norming constants
    rho = np.array([b.rho for b in data.bound_states])
    gam = np.array([[b.gamma_plus, b.gamma_minus] for b in data.bound_states]).reshape(-1, 2)
    sep = float(np.min(np.diff(np.sort(rho)))) if rho.size > 1 else float("inf")
    outside = bool(all(not curve.in_spectrum(r) and np.min(np.abs(curve.E - r)) > 0 for r in rho))
    det["ii"] = {"rho": rho.tolist(), "gamma": gam.tolist(), "min_separation": sep, "outside_spectrum": outside}
    ok["ii"] = bool(outside and sep > 1e-10 and np.all(np.isfinite(gam)) and np.all(gam > 0))

    # (iii) single-valuedness of T
    h = _log_modulus(data)
    if data.genus and np.all(np.isfinite(h)):
        q = conjugate_periods(data, ResolventGreen(data.edges), h)
        dev = float(np.max(np.abs(q - np.round(q))))
        det["iii"] = {"periods": q.tolist(), "deviation": dev}
        ok["iii"] = dev < tol_period
    else:
        det["iii"] = {"periods": [], "deviation": 0.0 if data.genus == 0 else float("inf")}
        ok["iii"] = data.genus == 0

    # (iv) consistency relations and band-edge limits
    cons = float(np.max(np.abs(data.T * data.R_plus[k] + data.T[k] * data.R_minus)))
    gam_res = []
    for b in data.bound_states:
        if not np.all(np.isfinite(h)):
            gam_res.append(float("inf"))
            continue
        res2 = residue_modulus(data, b, h) ** 2
        gam_res.append(float(abs(b.gamma_plus * b.gamma_minus * curve.R(b.rho).real / res2 - 1)))
    edge = []
    rs = np.abs(sqrt_R(curve, data.lam + 0j))
    with np.errstate(divide="ignore", invalid="ignore"):
        lim_p = rs * np.abs(data.R_plus + 1) / np.abs(data.T)
        lim_m = rs * np.abs(data.R_minus + 1) / np.abs(data.T)
    edge_ok = True
    for grid in _band_grids(data):
        M = grid.t.size
        for pos in ((0, 1, 2), (M // 2 - 1, M // 2 - 2, M // 2 - 3), (M - 1, M - 2, M - 3), (M // 2, M // 2 + 1, M // 2 + 2)):
            for lim in (lim_p, lim_m):
                v = lim[grid.index[list(pos)]]
                d = np.abs(grid.x[list(pos)] - (grid.right if pos[0] in (0, M - 1) else grid.left))
                expo = float(np.polyfit(np.log(d), np.log(v), 1)[0]) if np.all(v > 0) else float("inf")
                mono = bool(v[0] <= v[1] <= v[2])
                edge.append({"values": v.tolist(), "exponent": expo})
                edge_ok &= mono and expo > 0.25
    det["iv"] = {"consistency": cons, "gamma_identity": gam_res, "edge_limits": edge}
    ok["iv"] = bool(cons < tol_consistency and all(r < tol_gamma for r in gam_res) and edge_ok)
    return ValidationReport(ok, det)


def corrupt(data: "ScatteringData", kind: str) -> "ScatteringData":
    """Deliberately broken copies used to exercise the validator.

    ``negate_gamma`` flips the sign of both norming constants of the first
    bound state, ``flip_R_minus`` replaces ``R_-`` by ``-R_-`` and
    ``unit_R_patch`` pushes ``|R_pm|`` to one on a symmetric patch of nodes.
    """
    out = data.copy()
    if kind == "negate_gamma":
        if not out.bound_states:
            raise InvalidInput("no bound state to corrupt")
        b = out.bound_states[0]
        b.gamma_plus, b.gamma_minus = -b.gamma_plus, -b.gamma_minus
    elif kind == "flip_R_minus":
        out.R_minus = -out.R_minus
    elif kind == "unit_R_patch":
        N = out.nodes_per_band
        mid = np.arange(N // 2 - 2, N // 2 + 2)
        idx = np.concatenate([mid, mid + N])
        for R in (out.R_plus, out.R_minus):
            R[idx] = R[idx] / np.abs(R[idx])
    else:
        raise InvalidInput("unknown corruption %r" % kind)
    return out
