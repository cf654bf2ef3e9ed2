"""Projection-corrected deconvoluted residual-marked empirical process.

Every integral here has the form ``int p(x) K_b((x - W_i)/b) e^{i x xi} dx``
for a polynomial ``p``.  Substituting ``x = W_i + b u`` turns it into

    e^{i W_i xi} * sum_l b^l p^(l)(W_i) / l! * m_l(xi)

with the moments ``m_l`` from :func:`deconvospec.kernel.moment_table`, so no
per-observation quadrature is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .eiv import ParametricModel, solve_ridged
from .errors import InputShapeMismatch
from .kernel import FLAT, MomentTable


@dataclass(frozen=True)
class XiGrid:
    """Uniform midpoint grid on ``Pi = [lo, hi]``."""

    lo: float = -3.0
    hi: float = 3.0
    n_xi: int = 31

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("xi grid needs lo < hi")
        if self.n_xi < 3 or self.n_xi % 2 == 0:
            raise ValueError("n_xi must be odd and at least 3")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / self.n_xi

    @property
    def nodes(self) -> np.ndarray:
        return self.lo + (np.arange(self.n_xi) + 0.5) * self.step

    def clipped(self, b: float, half_width: float = FLAT) -> "XiGrid":
        """Restrict to ``|b xi| <= half_width``, where the flat-top kernel is flat.

        On that band the deconvolved weight ``e^{i x xi}`` is unbiased; beyond
        it the kernel taper adds a bias of order ``b K^ft'(b xi)`` that does
        not vanish at finite bandwidth.
        """
        edge = half_width / b
        lo, hi = max(self.lo, -edge), min(self.hi, edge)
        if not lo < hi:
            raise ValueError(f"xi grid [{self.lo:g}, {self.hi:g}] misses the flat band |xi| <= {edge:.3g}")
        return XiGrid(lo, hi, self.n_xi)


@dataclass(frozen=True)
class Sample:
    y: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        w = np.asarray(self.w, dtype=float).ravel()
        if y.size != w.size:
            raise InputShapeMismatch(f"y has {y.size} rows but w has {w.size}")
        if y.size == 0:
            raise InputShapeMismatch("empty sample")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class ProjectionComponents:
    G: np.ndarray
    Delta: np.ndarray
    beta: np.ndarray  # Delta^{-1} G, one column per xi
    ridge_applied: bool
    cond: float


@dataclass(frozen=True)
class PsiCache:
    """Per-observation projected integrands ``psi_i(xi)``, shape ``(n, n_xi)``."""

    psi: np.ndarray
    theta: np.ndarray
    xi: np.ndarray
    b: float

    @property
    def n(self) -> int:
        return self.psi.shape[0]


def _expansion(w, b, max_power):
    """``P[i, m, l] = C(m, l) w_i^(m-l) b^l``: u^l coefficient of ``(w_i + b u)^m``."""
    m = np.arange(max_power + 1)
    l = np.arange(max_power + 1)
    c = comb(m[:, None], l[None, :]) * b ** l[None, :]
    e = m[:, None] - l[None, :]
    wp = np.asarray(w, dtype=float)[:, None, None] ** np.maximum(e, 0)[None]
    return np.where(e >= 0, c * wp, 0.0)


def monomial_integrals(w, table: MomentTable, max_power: int, grid_power: int | None = None):
    """Integrals of ``x^m`` against each observation's kernel.

    Returns ``(at_zero, on_grid)`` with shapes ``(n, max_power+1)`` and
    ``(n, grid_power+1, n_xi)``; ``grid_power`` defaults to ``max_power`` and
    ``grid_power=-1`` skips the frequency grid.
    """
    if max_power > table.order:
        raise ValueError(f"moment table has order {table.order}, need {max_power}")
    grid_power = max_power if grid_power is None else min(grid_power, max_power)
    p = _expansion(w, table.b, max_power)
    zero = p @ table.at_zero[: max_power + 1]
    if grid_power < 0:
        return zero, None
    pg = p[:, : grid_power + 1, : grid_power + 1]
    phase = np.exp(1j * np.multiply.outer(np.asarray(w, dtype=float), table.xi_grid))
    grid = np.einsum("iml,lk->imk", pg, table.values[: grid_power + 1]) * phase[:, None, :]
    return zero, grid


def raw_integrals(sample: Sample, model: ParametricModel, table: MomentTable):
    """``int (Y_i - g(x)) K_b((x - W_i)/b) e^{i x xi} dx`` for every i and xi."""
    d = model.degree
    _, grid = monomial_integrals(sample.w, table, d)
    return sample.y[:, None] * grid[:, 0, :] - np.einsum("j,ijk->ik", model.theta, grid)


def raw_integral(i, sample: Sample, model: ParametricModel, table: MomentTable):
    one = Sample(sample.y[i : i + 1], sample.w[i : i + 1])
    return raw_integrals(one, model, table)[0]


def _residual_marks(sample, model, zero):
    """``q_i[k] = int (Y_i - g(x)) x^k K_b dx`` from the xi = 0 monomial integrals."""
    d = model.degree
    idx = np.add.outer(np.arange(d + 1), np.arange(d + 1))  # [k, j] -> j + k
    return sample.y[:, None] * zero[:, : d + 1] - zero[:, idx] @ model.theta


def build_projection(sample: Sample, model: ParametricModel, table: MomentTable) -> ProjectionComponents:
    d = model.degree
    zero, grid = monomial_integrals(sample.w, table, 2 * d, grid_power=d)
    g = grid.mean(axis=0)
    mz = zero.mean(axis=0)
    delta = mz[np.add.outer(np.arange(d + 1), np.arange(d + 1))]
    beta, cond, ridge = solve_ridged(delta.astype(complex), g)
    return ProjectionComponents(G=g, Delta=delta, beta=beta, ridge_applied=ridge, cond=cond)


def projected_psi(
    sample: Sample,
    model: ParametricModel,
    components: ProjectionComponents,
    table: MomentTable,
    project: bool = True,
) -> PsiCache:
    """``psi_i(xi) = raw_i(xi) - q_i^T Delta^{-1} G(xi)``.

    ``project=False`` drops the correction and gives the plain deconvoluted
    residual-marked integrands.
    """
    raw = raw_integrals(sample, model, table)
    if project:
        zero, _ = monomial_integrals(sample.w, table, 2 * model.degree, grid_power=-1)
        raw = raw - _residual_marks(sample, model, zero) @ components.beta
    return PsiCache(psi=raw, theta=model.theta.copy(), xi=table.xi_grid, b=table.b)


def residual_mark_mean(sample: Sample, model: ParametricModel, table: MomentTable):
    """``M_n``: sample mean of the residual marks ``q_i``."""
    zero, _ = monomial_integrals(sample.w, table, 2 * model.degree, grid_power=-1)
    return _residual_marks(sample, model, zero).mean(axis=0)


def weighted_mean(cache: PsiCache, v):
    """``(1/n) sum_i v_i psi_i(xi)``."""
    return np.asarray(v, dtype=complex) @ cache.psi / cache.n


def s_pro(cache: PsiCache):
    """Column mean of the cached integrands, the projected process on the grid."""
    if cache.n == 0:
        raise ValueError("empty cache")
    return weighted_mean(cache, np.ones(cache.n))
