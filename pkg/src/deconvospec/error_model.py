"""Measurement-error characteristic functions.

Three error models are supported, all symmetric about zero so that the
characteristic function is real and even:

* ``KnownLaplace``: ``1 / (1 + lambda2 * t**2)`` (variance ``2 * lambda2``)
* ``KnownGaussian``: ``exp(-mu * t**2)`` (variance ``2 * mu``)
* ``Estimated``: ``|mean_j cos(t * D_j)| ** 0.5`` built from differences
  ``D_j = W_j - W_j^r`` of repeated measurements, floored from below.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UnstableDeconvolution

EXP_CAP = 700.0


@dataclass(frozen=True)
class ErrorMoments:
    """Second and fourth moments of the measurement error."""

    mu2: float
    mu4: float


@dataclass(frozen=True)
class KnownLaplace:
    lambda2: float

    def __post_init__(self):
        if not self.lambda2 >= 0:
            raise ValueError("lambda2 must be nonnegative")

    @classmethod
    def from_variance(cls, var: float) -> "KnownLaplace":
        return cls(var / 2.0)

    @property
    def sigma2(self) -> float:
        return 2.0 * self.lambda2

    def cf(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 / (1.0 + self.lambda2 * t * t)

    def inv_cf(self, t):
        t = np.asarray(t, dtype=float)
        return 1.0 + self.lambda2 * t * t

    def moments(self) -> ErrorMoments:
        # Laplace kurtosis is 6: E eps^4 = 6 (2 lambda2)^2 = 24 lambda2^2
        return ErrorMoments(2.0 * self.lambda2, 24.0 * self.lambda2**2)


@dataclass(frozen=True)
class KnownGaussian:
    mu: float
    exp_cap: float = EXP_CAP

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError("mu must be nonnegative")

    @classmethod
    def from_variance(cls, var: float) -> "KnownGaussian":
        return cls(var / 2.0)

    @property
    def sigma2(self) -> float:
        return 2.0 * self.mu

    def cf(self, t):
        t = np.asarray(t, dtype=float)
        return np.exp(-self.mu * t * t)

    def inv_cf(self, t):
        t = np.asarray(t, dtype=float)
        expo = self.mu * t * t
        if np.any(expo > self.exp_cap):
            bad = float(np.max(np.abs(t)[expo > self.exp_cap]))
            raise UnstableDeconvolution(
                f"exp(mu t^2) overflows: mu*t^2 = {self.mu * bad * bad:.6g} "
                f"> cap {self.exp_cap:g} at t = {bad:.6g}",
                t=bad,
            )
        return np.exp(expo)

    def moments(self) -> ErrorMoments:
        s2 = 2.0 * self.mu
        return ErrorMoments(s2, 3.0 * s2 * s2)


@dataclass(frozen=True)
class Estimated:
    """Characteristic function estimated from repeated measurements.

    Parameters
    ----------
    diffs : array_like
        ``W_i - W_i^r`` for each unit.
    ridge_floor : float, optional
        Lower bound applied to the estimate so its reciprocal stays bounded.
        Defaults to ``n ** -0.5``.
    """

    diffs: np.ndarray
    ridge_floor: float | None = None
    _floor: float = field(init=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.diffs, dtype=float).ravel()
        if d.size == 0:
            raise ValueError("diffs must be nonempty")
        if not np.all(np.isfinite(d)):
            raise ValueError("diffs must be finite")
        d.setflags(write=False)
        object.__setattr__(self, "diffs", d)
        floor = d.size ** -0.5 if self.ridge_floor is None else float(self.ridge_floor)
        if not 0 <= floor <= 1:
            raise ValueError("ridge_floor must lie in [0, 1]")
        object.__setattr__(self, "_floor", floor)

    @classmethod
    def from_repeated(cls, w, w_rep, ridge_floor=None) -> "Estimated":
        w = np.asarray(w, dtype=float)
        w_rep = np.asarray(w_rep, dtype=float)
        return cls(w - w_rep, ridge_floor)

    @property
    def floor(self) -> float:
        return self._floor

    @property
    def sigma2(self) -> float:
        return float(np.mean(self.diffs**2) / 2.0)

    def cf(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        out = np.empty(flat.shape)
        # chunked to bound the (len(t), n) temporary
        step = max(1, 2_000_000 // self.diffs.size)
        for s in range(0, flat.size, step):
            c = np.cos(np.multiply.outer(flat[s : s + step], self.diffs)).mean(axis=1)
            out[s : s + step] = np.sqrt(np.abs(c))
        out = np.maximum(out, self._floor)
        return out.reshape(t.shape)

    def inv_cf(self, t):
        return 1.0 / self.cf(t)

    def moments(self) -> ErrorMoments:
        return estimate_moments(self.diffs)


def cf_eval(model, t):
    return model.cf(t)


def inv_cf_eval(model, t):
    """Reciprocal characteristic function ``1 / cf(t)``.

    Raises :class:`UnstableDeconvolution` when the Gaussian reciprocal
    would overflow.
    """
    return model.inv_cf(t)


def known_moments(model) -> ErrorMoments:
    if isinstance(model, Estimated):
        raise TypeError("known_moments needs a known error model; use estimate_moments")
    return model.moments()


def estimate_moments(diffs) -> ErrorMoments:
    """Error moments from repeated-measurement differences ``D = eps - eps'``.

    Uses ``E D^2 = 2 mu2`` and ``E D^4 = 2 mu4 + 6 mu2^2``; ``mu4`` is clamped
    at ``mu2^2`` so the corrected moment matrix cannot go indefinite from noise.
    """
    d = np.asarray(diffs, dtype=float).ravel()
    if d.size == 0:
        raise ValueError("diffs must be nonempty")
    mu2 = float(np.mean(d**2) / 2.0)
    mu4 = float((np.mean(d**4) - 6.0 * mu2**2) / 2.0)
    return ErrorMoments(mu2, max(mu4, mu2**2))
