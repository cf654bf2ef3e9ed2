"""KS/CvM statistics, multiplier bootstrap and the end-to-end test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from .eiv import als_fit
from .error_model import Estimated, KnownGaussian, KnownLaplace
from .errors import InputShapeMismatch
from .kernel import DeconvKernelSpec, bandwidth_rot, moment_table
from .projection import PsiCache, Sample, XiGrid, build_projection, projected_psi, s_pro, weighted_mean

MAMMEN_LOW = -(math.sqrt(5.0) - 1.0) / 2.0
MAMMEN_HIGH = (math.sqrt(5.0) + 1.0) / 2.0
MAMMEN_P_LOW = (math.sqrt(5.0) + 1.0) / (2.0 * math.sqrt(5.0))

ErrorSpec = Union[KnownLaplace, KnownGaussian, Literal["estimated"]]


@dataclass(frozen=True)
class TestConfig:
    """Settings for one specification test.

    ``error`` is a known error model, or ``"estimated"`` to estimate the
    error characteristic function from a repeated measurement.
    """

    __test__ = False  # keep pytest from collecting this class

    error: ErrorSpec = field(default_factory=lambda: KnownLaplace.from_variance(1.0 / 12.0))
    case: Literal["ordinary", "super"] = "ordinary"
    c: float = 5.0
    B: int = 199
    alphas: tuple = (0.01, 0.05, 0.10)
    multiplier: Literal["mammen", "rademacher"] = "mammen"
    seed: int = 0
    xi: XiGrid = field(default_factory=XiGrid)
    fit_degree: int = 1
    ridge_floor: float | None = None
    clip_to_flat: bool = True

    def xi_grid(self, b: float) -> XiGrid:
        return self.xi.clipped(b) if self.clip_to_flat else self.xi

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be at least 1")
        alphas = tuple(sorted(float(a) for a in self.alphas))
        if not alphas or not all(0.0 < a < 1.0 for a in alphas):
            raise ValueError("alphas must lie in (0, 1)")
        object.__setattr__(self, "alphas", alphas)
        if self.case not in ("ordinary", "super"):
            raise ValueError(f"unknown case {self.case!r}")
        if self.multiplier not in ("mammen", "rademacher"):
            raise ValueError(f"unknown multiplier {self.multiplier!r}")
        if not (isinstance(self.error, (KnownLaplace, KnownGaussian)) or self.error == "estimated"):
            raise ValueError(f"unsupported error specification {self.error!r}")


@dataclass
class TestResult:
    __test__ = False

    ks: float
    cvm: float
    boot_ks: np.ndarray
    boot_cvm: np.ndarray
    alphas: tuple
    crit_ks: dict
    crit_cvm: dict
    pval_ks: float
    pval_cvm: float
    reject_ks: dict
    reject_cvm: dict
    n: int
    bandwidth: float
    xi: XiGrid
    theta_hat: np.ndarray
    ridge_als: bool
    ridge_projection: bool

    def records(self):
        """One row per (statistic, alpha) for CSV output."""
        rows = []
        for stat, value, crit, rej, pval in (
            ("ks", self.ks, self.crit_ks, self.reject_ks, self.pval_ks),
            ("cvm", self.cvm, self.crit_cvm, self.reject_cvm, self.pval_cvm),
        ):
            for a in self.alphas:
                rows.append(
                    {"stat": stat, "alpha": a, "value": value, "crit": crit[a], "pval": pval, "reject": int(rej[a])}
                )
        return rows

    def summary(self) -> dict:
        out = {
            "n": self.n,
            "bandwidth": self.bandwidth,
            "xi_lo": self.xi.lo,
            "xi_hi": self.xi.hi,
            "xi_n": self.xi.n_xi,
            "ks": self.ks,
            "cvm": self.cvm,
            "pval_ks": self.pval_ks,
            "pval_cvm": self.pval_cvm,
        }
        for k, t in enumerate(self.theta_hat):
            out[f"theta_{k}"] = float(t)
        for a in self.alphas:
            out[f"crit_ks@{a:g}"] = self.crit_ks[a]
            out[f"crit_cvm@{a:g}"] = self.crit_cvm[a]
            out[f"reject_ks@{a:g}"] = int(self.reject_ks[a])
            out[f"reject_cvm@{a:g}"] = int(self.reject_cvm[a])
        out["ridge_als"] = int(self.ridge_als)
        out["ridge_projection"] = int(self.ridge_projection)
        return out


def ks_stat(s, n: int) -> float:
    s = np.asarray(s)
    if s.size == 0:
        return 0.0
    return math.sqrt(n) * float(np.abs(s).max())


def cvm_stat(s, xi: XiGrid, n: int) -> float:
    return n * float(np.sum(np.abs(np.asarray(s)) ** 2)) * xi.step


def draw_multipliers(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. zero-mean, unit-variance multipliers."""
    if kind == "mammen":
        low = rng.random(n) < MAMMEN_P_LOW
        return np.where(low, MAMMEN_LOW, MAMMEN_HIGH)
    if kind == "rademacher":
        return np.where(rng.random(n) < 0.5, -1.0, 1.0)
    raise ValueError(f"unknown multiplier {kind!r}")


def _multiplier_matrix(kind, n, B, seed):
    # one independent stream per replicate, so results do not depend on
    # how replicates are scheduled
    children = np.random.SeedSequence(seed).spawn(B)
    return np.stack([draw_multipliers(kind, n, np.random.default_rng(s)) for s in children])


def bootstrap_distribution(cache: PsiCache, config: TestConfig, xi: XiGrid, multipliers=None):
    """Bootstrap KS and CvM statistics by reweighting the cached integrands.

    ``xi`` is the grid the cache was built on.  ``multipliers`` overrides the
    random draws with a ``(B, n)`` matrix.
    """
    n = cache.n
    v = _multiplier_matrix(config.multiplier, n, config.B, config.seed) if multipliers is None else multipliers
    v = np.atleast_2d(np.asarray(v, dtype=float))
    boot_ks = np.empty(v.shape[0])
    boot_cvm = np.empty(v.shape[0])
    # row by row through the same product as s_pro, so V = 1 reproduces
    # the observed statistics bit for bit
    for r, vr in enumerate(v):
        s_star = weighted_mean(cache, vr)
        boot_ks[r] = ks_stat(s_star, n)
        boot_cvm[r] = cvm_stat(s_star, xi, n)
    return boot_ks, boot_cvm


def critical_value(boot, alpha: float) -> float:
    """The ``ceil(B (1 - alpha))``-th order statistic of the bootstrap draws."""
    srt = np.sort(np.asarray(boot))
    k = math.ceil(len(srt) * (1.0 - alpha) - 1e-12)
    return float(srt[min(max(k, 1), len(srt)) - 1])


def p_value(boot, observed: float) -> float:
    boot = np.asarray(boot)
    return (1.0 + np.count_nonzero(boot >= observed)) / (boot.size + 1.0)


def resolve_error_model(config: TestConfig, w, w_rep):
    if config.error == "estimated":
        if w_rep is None:
            raise InputShapeMismatch("an estimated error model needs the repeated measurement w_rep")
        w_rep = np.asarray(w_rep, dtype=float).ravel()
        if w_rep.size != np.size(w):
            raise InputShapeMismatch(f"w has {np.size(w)} rows but w_rep has {w_rep.size}")
        return Estimated.from_repeated(w, w_rep, config.ridge_floor)
    if w_rep is not None:
        raise InputShapeMismatch("w_rep was supplied but the error distribution is configured as known")
    return config.error


def run_test(y, w, w_rep=None, config: TestConfig | None = None) -> TestResult:
    """Projection-based ICM specification test with a noisy regressor."""
    config = TestConfig() if config is None else config
    sample = Sample(y, w)
    model = resolve_error_model(config, sample.w, w_rep)
    n = sample.n

    b = bandwidth_rot(config.case, model.sigma2, n, config.c)
    fit = als_fit(sample.y, sample.w, config.fit_degree, model.moments())
    null = fit.model
    xi = config.xi_grid(b)
    spec = DeconvKernelSpec(b, model, max_order=2 * config.fit_degree)
    table = moment_table(spec, xi.nodes)
    comps = build_projection(sample, null, table)
    cache = projected_psi(sample, null, comps, table)

    s = s_pro(cache)
    ks = ks_stat(s, n)
    cvm = cvm_stat(s, xi, n)
    boot_ks, boot_cvm = bootstrap_distribution(cache, config, xi)
    crit_ks = {a: critical_value(boot_ks, a) for a in config.alphas}
    crit_cvm = {a: critical_value(boot_cvm, a) for a in config.alphas}
    return TestResult(
        ks=ks,
        cvm=cvm,
        boot_ks=boot_ks,
        boot_cvm=boot_cvm,
        alphas=config.alphas,
        crit_ks=crit_ks,
        crit_cvm=crit_cvm,
        pval_ks=p_value(boot_ks, ks),
        pval_cvm=p_value(boot_cvm, cvm),
        reject_ks={a: ks > crit_ks[a] for a in config.alphas},
        reject_cvm={a: cvm > crit_cvm[a] for a in config.alphas},
        n=n,
        bandwidth=b,
        xi=xi,
        theta_hat=fit.theta_hat,
        ridge_als=fit.ridge_applied,
        ridge_projection=comps.ridge_applied,
    )
