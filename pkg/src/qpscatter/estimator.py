"""scikit-learn facade: perturbations in, flattened scattering data out, and back."""

from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import glm
from .errors import InvalidInput
from .jost import Perturbation
from .scattering import BoundState, ScatteringData, _background, scattering_data

_BOUND_FIELDS = ("rho", "gamma_plus", "gamma_minus", "coupling", "alpha_prime", "w_re", "w_im")


class ScatteringTransform(TransformerMixin, BaseEstimator):
    """Forward and inverse scattering over a fixed finite-gap background.

    A sample is a perturbation ``[da(lo..hi), db(lo..hi)]`` on ``support``.
    ``transform`` maps it to ``[T0, Re/Im T, Re/Im R_+, Re/Im R_-, bound
    state slots]`` on the circle nodes; unused bound-state slots are NaN.
    ``inverse_transform`` solves the GLM equation and returns the
    perturbation on ``support``.
    """

    def __init__(self, edges: Sequence[float] = (-1.0, 1.0), mus: Sequence[float] = (),
                 sigmas: Sequence[int] = (), window: int = 40, grid: Optional[int] = None,
                 support: Tuple[int, int] = (-2, 2), max_bound_states: int = 4, pad: int = 2):
        self.edges = edges
        self.mus = mus
        self.sigmas = sigmas
        self.window = window
        self.grid = grid
        self.support = support
        self.max_bound_states = max_bound_states
        self.pad = pad

    def fit(self, X=None, y=None):
        self.background_ = _background(tuple(map(float, self.edges)), tuple(map(float, self.mus)),
                                       tuple(map(int, self.sigmas)), int(self.window))
        lo, hi = self.support
        if lo > hi:
            raise InvalidInput("support must satisfy lo <= hi")
        self.sites_ = np.arange(lo, hi + 1)
        self.n_features_in_ = 2 * self.sites_.size
        zero = scattering_data(self.background_, Perturbation(), grid=self.grid)
        self.n_nodes_ = int(zero.lam.size)
        self.template_ = zero
        return self

    def _perturbation(self, row: np.ndarray) -> Perturbation:
        k = self.sites_.size
        return Perturbation.from_sites(zip(self.sites_.tolist(), row[:k].tolist(), row[k:].tolist()))

    def to_data(self, x) -> ScatteringData:
        """Scattering data of one perturbation row."""
        check_is_fitted(self, "background_")
        row = np.asarray(x, float).ravel()
        return scattering_data(self.background_, self._perturbation(row), grid=self.grid)

    def _encode(self, data: ScatteringData) -> np.ndarray:
        if len(data.bound_states) > self.max_bound_states:
            raise InvalidInput("%d bound states exceed max_bound_states=%d"
                               % (len(data.bound_states), self.max_bound_states))
        slots = np.full((self.max_bound_states, len(_BOUND_FIELDS)), np.nan)
        for i, b in enumerate(data.bound_states):
            d = b.to_dict()
            slots[i] = [d[f] for f in _BOUND_FIELDS]
        parts = [[data.T0]]
        for v in (data.T, data.R_plus, data.R_minus):
            parts += [v.real, v.imag]
        parts.append(slots.ravel())
        return np.concatenate(parts)

    def _decode(self, z: np.ndarray) -> ScatteringData:
        N, t = self.n_nodes_, self.template_
        cols = [z[1 + k * N: 1 + (k + 1) * N] for k in range(6)]
        slots = z[1 + 6 * N:].reshape(self.max_bound_states, len(_BOUND_FIELDS))
        bounds = [BoundState.from_dict(dict(zip(_BOUND_FIELDS, s))) for s in slots if np.isfinite(s[0])]
        return ScatteringData(t.edges, t.mus, t.sigmas, t.window, t.nodes_per_band, t.lam, t.lip, t.w,
                              cols[0] + 1j * cols[1], cols[2] + 1j * cols[3], cols[4] + 1j * cols[5],
                              bounds, float(z[0]))

    def transform(self, X):
        check_is_fitted(self, "background_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInput("expected %d features, got %d" % (self.n_features_in_, X.shape[1]))
        return np.vstack([self._encode(self.to_data(row)) for row in X])

    def inverse_transform(self, Z):
        check_is_fitted(self, "background_")
        Z = np.atleast_2d(np.asarray(Z, float))  # NaN marks unused bound-state slots
        lo, hi = self.support
        op = self.background_
        out = np.empty((Z.shape[0], self.n_features_in_))
        for i, z in enumerate(Z):
            res, _, _ = glm.invert(self._decode(z), (lo - self.pad, hi + self.pad), op_q=op)
            keep = (res.n >= lo) & (res.n <= hi)
            out[i] = np.concatenate([(res.a - res.a_q)[keep], (res.b - res.b_q)[keep]])
        return out

