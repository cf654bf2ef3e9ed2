"""Flat-top kernel, deconvolution kernel and its complex moment table.

The deconvolution kernel is ``K_eps(u) = (1/2pi) int exp(-i t u) Phi(t) dt``
with ``Phi(t) = K^ft(t) / f_eps^ft(t / b)`` supported on ``[-1, 1]``.  All
integrals of polynomials against ``K_eps`` reduce to the moments

    m_l(xi) = int u^l K_eps(u) exp(i b u xi) du = (-i)^l Phi^(l)(b xi),

which are tabulated once per bandwidth and reused for every observation.
Known error models use the derivative identity, with exact Taylor-series
derivatives of ``K^ft``.  Estimated models integrate in ``u`` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.fft

from . import _jet
from .error_model import Estimated, KnownGaussian, KnownLaplace
from .errors import QuadratureNonConvergence

FLAT = 0.05
# below this exponent exp() is zero in double precision, and so are its
# Taylor coefficients up to order 8
_EXP_FLOOR = -700.0


def flattop_ft(t):
    """Fourier transform of the infinite-order flat-top kernel.

    Equals one on ``|t| <= 0.05``, zero on ``|t| >= 1`` and decays smoothly
    (C-infinity) in between.
    """
    a = np.abs(np.asarray(t, dtype=float))
    out = np.zeros(a.shape)
    out[a <= FLAT] = 1.0
    mid = (a > FLAT) & (a < 1.0)
    am = a[mid]
    with np.errstate(over="ignore", under="ignore"):
        inner = np.exp(-1.0 / (am - FLAT) ** 2)
        out[mid] = np.exp(-inner / (am - 1.0) ** 2)
    return out if out.ndim else float(out)


def flattop_ft_jet(s0, order):
    """Taylor coefficients of ``K^ft`` at each point of ``s0``."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    jet = _jet.constant(0.0, order, s0.shape)
    a = np.abs(s0)
    jet[0][a <= FLAT] = 1.0

    # exp(-1/y^2) with y = |s| - FLAT vanishes to all orders for small y
    mid = (a > FLAT) & (a < 1.0)
    y0 = a - FLAT
    live_inner = mid & (-1.0 / np.where(mid, y0, 1.0) ** 2 > _EXP_FLOOR)
    jet[0][mid & ~live_inner] = 1.0

    idx = np.flatnonzero(live_inner)
    if idx.size:
        sgn = np.sign(s0[idx])
        x = _jet.variable(a[idx], order)
        if order >= 1:
            x[1] = sgn
        y = x.copy()
        y[0] -= FLAT
        ry = _jet.reciprocal(y)
        inner = _jet.exp(-_jet.mul(ry, ry))
        z = x.copy()
        z[0] -= 1.0
        rz = _jet.reciprocal(z)
        expo = -_jet.mul(inner, _jet.mul(rz, rz))
        ok = expo[0] > _EXP_FLOOR
        sub = np.zeros_like(expo)
        sub[:, ok] = _jet.exp(expo[:, ok])
        jet[:, idx] = sub
    return jet


def bandwidth_rot(case: Literal["ordinary", "super"], sigma2: float, n: int, c: float = 1.0) -> float:
    """Rule-of-thumb bandwidth.

    ``c * (5 sigma^4 / n) ** (1/27)`` for ordinary-smooth errors and
    ``c * (4 sigma^2 / log n) ** (1/2)`` for supersmooth errors.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    if not c > 0:
        raise ValueError("c must be positive")
    if case == "ordinary":
        return c * (5.0 * sigma2**2 / n) ** (1.0 / 27.0)
    if case == "super":
        return c * np.sqrt(4.0 * sigma2 / np.log(n))
    raise ValueError(f"unknown case {case!r}")


def _simpson_weights(n_intervals, h):
    w = np.ones(n_intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


@dataclass(frozen=True)
class DeconvKernelSpec:
    """Bandwidth, error model and quadrature settings for the deconvolution kernel.

    ``t_grid_n`` is the (even) number of Simpson intervals on ``[-1, 1]``.
    Constructing a spec checks that ``1 / f_eps^ft`` is finite on
    ``[-1/b, 1/b]`` and raises :class:`UnstableDeconvolution` otherwise.
    """

    b: float
    model: object
    t_grid_n: int = 2048
    u_trunc: float = 400.0
    u_step: float = 0.05
    max_order: int = 6
    _t: np.ndarray = field(init=False, repr=False, compare=False)
    _tw: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("bandwidth must be positive")
        if self.t_grid_n < 256 or self.t_grid_n % 2:
            raise ValueError("t_grid_n must be an even integer >= 256")
        ratio = self.u_trunc / self.u_step
        if not (self.u_step > 0 and abs(ratio - round(ratio)) < 1e-9):
            raise ValueError("u_trunc / u_step must be an integer")
        if not 0 <= self.max_order <= 8:
            raise ValueError("max_order must be in 0..8")
        self.model.inv_cf(1.0 / self.b)
        t = np.linspace(-1.0, 1.0, self.t_grid_n + 1)
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_tw", _simpson_weights(self.t_grid_n, 2.0 / self.t_grid_n))

    def phi(self, t):
        """``K^ft(t) / f_eps^ft(t / b)``, zero outside ``[-1, 1]``."""
        t = np.asarray(t, dtype=float)
        k = np.asarray(flattop_ft(t))
        out = np.zeros(t.shape)
        live = k > 0
        out[live] = k[live] * self.model.inv_cf(t[live] / self.b)
        return out

    def kernel(self, u):
        """Deconvolution kernel ``K_eps(u)`` on the standardised scale."""
        u = np.asarray(u, dtype=float)
        weights = self._tw * self.phi(self._t)
        flat = u.ravel()
        out = np.empty(flat.shape)
        step = max(1, 4_000_000 // self._t.size)
        for s in range(0, flat.size, step):
            out[s : s + step] = np.cos(np.multiply.outer(flat[s : s + step], self._t)) @ weights
        return (out / (2.0 * np.pi)).reshape(u.shape)

    def kernel_b(self, a):
        """Scaled kernel ``K_b(a) = K_eps(a) / b``."""
        return self.kernel(a) / self.b

    def u_grid(self, trunc=None):
        trunc = self.u_trunc if trunc is None else trunc
        m = int(round(trunc / self.u_step))
        return np.arange(-m, m + 1) * self.u_step

    def kernel_on_grid(self, trunc=None):
        """``K_eps`` on ``u_grid(trunc)``, by one FFT of ``Phi``.

        The t-spacing is tied to ``u_step`` through ``h * u_step * N = 2 pi``
        and is never coarser than ``2 / t_grid_n``.  ``Phi`` is smooth with
        compact support, so the trapezoid sum is accurate up to aliases at
        ``|u| ~ 2 pi / h``, far beyond any truncation radius in use.
        """
        u = self.u_grid(trunc)
        m = (u.size - 1) // 2
        n = scipy.fft.next_fast_len(
            max(int(np.ceil(np.pi * self.t_grid_n / self.u_step)), 2 * u.size)
        )
        h = 2.0 * np.pi / (n * self.u_step)
        j = np.arange(n)
        j = np.where(j <= n // 2, j, j - n)
        k = scipy.fft.fft(self.phi(j * h)).real * (h / (2.0 * np.pi))
        return u, np.r_[k[n - m :], k[: m + 1]]


def deconv_kernel_eval(spec: DeconvKernelSpec, u):
    return spec.kernel(u)


@dataclass(frozen=True)
class MomentTable:
    """Complex moments ``m_l(xi)`` for ``l = 0..order`` on a frequency grid.

    ``values[l, k]`` is ``m_l(xi_grid[k])``; ``at_zero[l]`` is ``m_l(0)``,
    which is real.
    """

    xi_grid: np.ndarray
    values: np.ndarray
    at_zero: np.ndarray
    b: float
    method: str

    @property
    def order(self) -> int:
        return self.values.shape[0] - 1


def _inv_cf_jet(model, s0, b, order):
    v = _jet.variable(s0, order) / b
    if isinstance(model, KnownLaplace):
        out = model.lambda2 * _jet.mul(v, v)
        out[0] += 1.0
        return out
    if isinstance(model, KnownGaussian):
        model.inv_cf(np.asarray(s0) / b)
        return _jet.exp(model.mu * _jet.mul(v, v))
    raise TypeError(f"no closed-form derivatives for {type(model).__name__}")


def _phi_derivatives(spec, s, order):
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.zeros((order + 1, s.size))
    live = np.abs(s) < 1.0
    if np.any(live):
        kj = flattop_ft_jet(s[live], order)
        ij = _inv_cf_jet(spec.model, s[live], spec.b, order)
        out[:, live] = _jet.derivatives(_jet.mul(kj, ij))
    return out


def _moments_derivative(spec, xi, order):
    d = _phi_derivatives(spec, spec.b * np.asarray(xi, dtype=float), order)
    phase = (-1j) ** np.arange(order + 1)
    return phase[:, None] * d


def _moments_quadrature(spec, xi, order, u, ku):
    """Riemann sums of ``u^l K_eps(u) e^{i b u xi}`` over the symmetric grid ``u``.

    ``K_eps`` is even, so the sum folds onto ``u >= 0``: even orders pick up
    the cosine part and odd orders ``i`` times the sine part.
    """
    half = u >= 0
    u, ku = u[half], ku[half]
    weight = np.where(u > 0, 2.0, 1.0) * ku * spec.u_step
    powers = u[None, :] ** np.arange(order + 1)[:, None] * weight
    arg = spec.b * np.multiply.outer(u, xi)
    out = np.empty((order + 1, len(xi)), dtype=complex)
    out[0::2] = powers[0::2] @ np.cos(arg)
    out[1::2] = 1j * (powers[1::2] @ np.sin(arg))
    return out


def moment_table(
    spec: DeconvKernelSpec,
    xi_grid,
    order: int | None = None,
    method: Literal["auto", "derivative", "quadrature"] = "auto",
    tol: float = 1e-4,
) -> MomentTable:
    """Tabulate ``m_l(xi)`` for ``l <= order`` on ``xi_grid`` and at ``xi = 0``.

    ``method="auto"`` uses the derivative identity for known error models and
    u-space quadrature for estimated ones.  The quadrature path raises
    :class:`QuadratureNonConvergence` when doubling the truncation radius
    moves any moment by more than ``tol`` relative to that order's largest
    moment.
    """
    order = spec.max_order if order is None else order
    if not 0 <= order <= 8:
        raise ValueError("order must be in 0..8")
    xi_grid = np.asarray(xi_grid, dtype=float)
    xi_all = np.r_[xi_grid, 0.0]
    if method == "auto":
        method = "quadrature" if isinstance(spec.model, Estimated) else "derivative"

    if method == "derivative":
        vals = _moments_derivative(spec, xi_all, order)
    elif method == "quadrature":
        u2, ku2 = spec.kernel_on_grid(2.0 * spec.u_trunc)
        inner = np.abs(u2) <= spec.u_trunc + 0.5 * spec.u_step
        vals = _moments_quadrature(spec, xi_all, order, u2[inner], ku2[inner])
        tail = _moments_quadrature(spec, xi_all, order, u2[~inner], ku2[~inner])
        vals2 = vals + tail
        scale = np.maximum(np.abs(vals2).max(axis=1), 1e-300)
        change = (np.abs(tail).max(axis=1) / scale).max()
        if change > tol:
            raise QuadratureNonConvergence(
                f"doubling u_trunc to {2 * spec.u_trunc:g} changed moments by {change:.3g} (relative)"
            )
        vals = vals2
    else:
        raise ValueError(f"unknown method {method!r}")

    return MomentTable(
        xi_grid=xi_grid,
        values=vals[:, :-1],
        at_zero=vals[:, -1].real.copy(),
        b=spec.b,
        method=method,
    )
