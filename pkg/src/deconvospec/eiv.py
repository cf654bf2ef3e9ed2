"""Adjusted least squares for polynomial regression with a noisy regressor.

Monomials of the contaminated regressor ``W = X + eps`` are replaced by
corrected polynomials ``H_k(W)`` with ``E[H_k(X + eps) | X] = X^k`` for a
symmetric error, which makes the normal equations unbiased.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .error_model import ErrorMoments
from .errors import InputShapeMismatch, SingularDesign

COND_LIMIT = 1e12
RIDGE_SCALE = 1e-8


@dataclass(frozen=True)
class ParametricModel:
    """Polynomial null family ``g(x; theta) = sum_k theta_k x^k``."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).ravel()
        if theta.size < 2:
            raise ValueError("degree must be at least 1")
        object.__setattr__(self, "theta", theta)

    @property
    def degree(self) -> int:
        return self.theta.size - 1

    def g(self, x):
        return np.polynomial.polynomial.polyval(x, self.theta)

    def grad(self, x):
        """``(1, x, ..., x^d)`` stacked along the last axis."""
        return np.asarray(x, dtype=float)[..., None] ** np.arange(self.degree + 1)


@dataclass(frozen=True)
class AlsFit:
    theta_hat: np.ndarray
    cond: float
    ridge_applied: bool

    @property
    def model(self) -> ParametricModel:
        return ParametricModel(self.theta_hat)


def corrected_monomial(k: int, w, moments: ErrorMoments):
    w = np.asarray(w, dtype=float)
    m2, m4 = moments.mu2, moments.mu4
    if k == 0:
        return np.ones_like(w)
    if k == 1:
        return w
    if k == 2:
        return w * w - m2
    if k == 3:
        return w**3 - 3.0 * m2 * w
    if k == 4:
        return w**4 - 6.0 * m2 * w * w + 6.0 * m2 * m2 - m4
    raise ValueError("corrected monomials are available for k <= 4")


def solve_ridged(m, v):
    """Solve ``m x = v``; ridge the diagonal when ``cond(m)`` exceeds the limit.

    Returns the solution, the condition number of ``m`` and whether the
    ridge was applied.
    """
    try:
        cond = float(np.linalg.cond(m))
    except np.linalg.LinAlgError as exc:
        raise SingularDesign("moment matrix has no singular value decomposition") from exc
    ridge = not np.isfinite(cond) or cond > COND_LIMIT
    if ridge:
        m = m + RIDGE_SCALE * np.trace(m).real / m.shape[0] * np.eye(m.shape[0])
    try:
        x = np.linalg.solve(m, v)
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(f"moment matrix is singular (cond={cond:.3g})") from exc
    if not np.all(np.isfinite(x)):
        raise SingularDesign(f"moment matrix is singular (cond={cond:.3g})")
    return x, cond, ridge


def als_fit(y, w, degree: int, moments: ErrorMoments) -> AlsFit:
    """Fit ``g(x; theta)`` of the given degree by adjusted least squares."""
    y = np.asarray(y, dtype=float).ravel()
    w = np.asarray(w, dtype=float).ravel()
    if y.size != w.size:
        raise InputShapeMismatch(f"y has {y.size} rows but w has {w.size}")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    if y.size < 10 * (degree + 1):
        raise InputShapeMismatch(f"need at least {10 * (degree + 1)} observations")
    h = np.stack([corrected_monomial(k, w, moments) for k in range(2 * degree + 1)])
    hm = h.mean(axis=1)
    idx = np.add.outer(np.arange(degree + 1), np.arange(degree + 1))
    m = hm[idx]
    v = h[: degree + 1] @ y / y.size
    theta, cond, ridge = solve_ridged(m, v)
    return AlsFit(theta, cond, ridge)
