"""Data-generating processes and the Monte Carlo harness for size/power tables.

Replication ``r`` of sample size ``n`` draws its data from the stream keyed
by ``(seed, n, r)`` whatever the DGP or bandwidth constant, so cells share
common random numbers and any subset of cells can be rerun exactly.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Literal

import numpy as np

from .error_model import KnownGaussian, KnownLaplace
from .errors import DeconvoSpecError
from .engine import TestConfig, run_test

ERROR_VARIANCE = 1.0 / 12.0
DGP_MODELS = (0, 1, 2)
STATS = ("ks", "cvm")
ALPHAS = (0.01, 0.05, 0.10)
C_GRID = (1.0, 2.0, 3.0, 5.0, 10.0, 15.0)
N_GRID = (500, 1000)
REPORT_COLUMNS = ("table", "n", "c", "alpha", "dgp", "stat", "rate", "se", "reps", "B", "failures")

ErrorKind = Literal["laplace_var_1_12", "gaussian_var_1_12"]


@dataclass(frozen=True)
class DgpSpec:
    """One of the three regression designs with a contaminated regressor.

    ``model`` 0 is the linear null ``Y = 1 + X + U``; model 1 adds
    ``delta X^2`` and model 2 adds ``delta cos(pi X)``.
    """

    model: int = 0
    delta: float = 0.5
    n: int = 500
    error: ErrorKind = "laplace_var_1_12"
    repeated: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.model not in DGP_MODELS:
            raise ValueError(f"model must be one of {DGP_MODELS}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.error not in ("laplace_var_1_12", "gaussian_var_1_12"):
            raise ValueError(f"unknown error kind {self.error!r}")


def _draw_error(kind, n, rng):
    if kind == "laplace_var_1_12":
        return rng.laplace(0.0, math.sqrt(ERROR_VARIANCE / 2.0), n)
    return rng.normal(0.0, math.sqrt(ERROR_VARIANCE), n)


def simulate_dgp(spec: DgpSpec, rng: np.random.Generator | None = None):
    """Draw ``(y, w, w_rep)``; ``w_rep`` is None unless ``spec.repeated``.

    The draws are consumed in the same order for every model, so with
    ``delta = 0`` all three models give identical output.
    """
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    n = spec.n
    x = rng.standard_normal(n)
    u = rng.normal(0.0, 0.5, n)
    eps = _draw_error(spec.error, n, rng)
    w_rep = x + _draw_error(spec.error, n, rng) if spec.repeated else None
    y = 1.0 + x + u
    if spec.model == 1:
        y = y + spec.delta * x**2
    elif spec.model == 2:
        y = y + spec.delta * np.cos(np.pi * x)
    return y, x + eps, w_rep


def replication_streams(seed: int, n: int, rep: int):
    """Data generator and bootstrap seed for one replication."""
    ss = np.random.SeedSequence([seed, n, rep])
    data_ss, boot_ss = ss.spawn(2)
    return np.random.default_rng(data_ss), int(boot_ss.generate_state(1)[0])


@dataclass
class CellResult:
    """Rejection counts of one Monte Carlo cell.

    ``rates[(stat, alpha)]`` is the rejection frequency over the
    replications that completed; ``failures`` counts the ones that raised a
    numerical error and were excluded.
    """

    rates: dict
    reps: int
    failures: int
    alphas: tuple

    @property
    def completed(self) -> int:
        return self.reps - self.failures

    def se(self, stat: str, alpha: float) -> float:
        p = self.rates[(stat, alpha)]
        m = self.completed
        return math.sqrt(p * (1.0 - p) / m) if m else float("nan")


def _one_replication(dgp: DgpSpec, config: TestConfig, rep: int):
    rng, boot_seed = replication_streams(dgp.seed, dgp.n, rep)
    y, w, w_rep = simulate_dgp(dgp, rng)
    try:
        res = run_test(y, w, w_rep, replace(config, seed=boot_seed))
    except DeconvoSpecError:
        return None
    return [res.reject_ks[a] for a in config.alphas] + [res.reject_cvm[a] for a in config.alphas]


def _run_block(args):
    dgp, config, reps = args
    return [_one_replication(dgp, config, r) for r in reps]


class McCellFailure(DeconvoSpecError):
    """Every replication of a Monte Carlo cell failed."""


def run_mc_cell(dgp: DgpSpec, config: TestConfig, reps: int, jobs: int = 1, executor=None) -> CellResult:
    """Rejection rates of ``run_test`` over ``reps`` simulated samples.

    ``dgp.seed`` is the master seed.  Results do not depend on ``jobs``.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    outcomes = _map_blocks(dgp, config, reps, jobs, executor)
    ok = np.array([o for o in outcomes if o is not None], dtype=float)
    failures = reps - len(ok)
    if len(ok) == 0:
        raise McCellFailure(f"all {reps} replications failed for n={dgp.n}, c={config.c:g}, dgp={dgp.model}")
    k = len(config.alphas)
    means = ok.mean(axis=0)
    rates = {}
    for j, a in enumerate(config.alphas):
        rates[("ks", a)] = float(means[j])
        rates[("cvm", a)] = float(means[k + j])
    return CellResult(rates=rates, reps=reps, failures=failures, alphas=config.alphas)


def _map_blocks(dgp, config, reps, jobs, executor):
    if executor is None and jobs <= 1:
        return _run_block((dgp, config, range(reps)))
    n_blocks = max(1, min(reps, 4 * max(jobs, 1)))
    blocks = [range(reps)[i::n_blocks] for i in range(n_blocks)]
    if executor is None:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_run_block, [(dgp, config, b) for b in blocks]))
    else:
        parts = list(executor.map(_run_block, [(dgp, config, b) for b in blocks]))
    out = [None] * reps
    for block, part in zip(blocks, parts):
        for r, o in zip(block, part):
            out[r] = o
    return out


@dataclass(frozen=True)
class TableSpec:
    """Error design of one published table and its default grid."""

    case: Literal["ordinary", "super"]
    error: ErrorKind
    estimated: bool
    n_list: tuple = N_GRID
    c_list: tuple = C_GRID

    def test_error(self):
        if self.estimated:
            return "estimated"
        if self.error == "laplace_var_1_12":
            return KnownLaplace.from_variance(ERROR_VARIANCE)
        return KnownGaussian.from_variance(ERROR_VARIANCE)


_LAP, _GAU = "laplace_var_1_12", "gaussian_var_1_12"
TABLES = {
    "1": TableSpec("ordinary", _LAP, False),
    "2": TableSpec("super", _GAU, False),
    "3": TableSpec("ordinary", _LAP, True),
    "4": TableSpec("super", _GAU, True),
    "a5": TableSpec("ordinary", _LAP, False, (500,)),
    "a6": TableSpec("ordinary", _LAP, False, (1000,)),
    "a7": TableSpec("super", _GAU, False, (500,)),
    "a8": TableSpec("super", _GAU, False, (1000,)),
    "a9": TableSpec("ordinary", _LAP, True, (500,)),
    "a10": TableSpec("ordinary", _LAP, True, (1000,)),
    "a11": TableSpec("super", _GAU, True, (500,)),
    "a12": TableSpec("super", _GAU, True, (1000,)),
}


def table_spec(table) -> TableSpec:
    key = str(table).lower()
    if key not in TABLES:
        raise ValueError(f"unknown table {table!r}; choose from {', '.join(TABLES)}")
    return TABLES[key]


@dataclass
class McReport:
    """Rejection-rate table, one row per (n, c, alpha, dgp, statistic)."""

    table: str
    rows: list
    reps: int
    B: int
    config: dict = field(default_factory=dict)

    def rate(self, n, c, alpha, dgp, stat) -> float:
        for r in self.rows:
            if (r["n"], r["c"], r["alpha"], r["dgp"], r["stat"]) == (n, float(c), alpha, dgp, stat):
                return r["rate"]
        raise KeyError((n, c, alpha, dgp, stat))

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: _fmt(r[k]) for k in REPORT_COLUMNS})
        return buf.getvalue() if fh is None else ""


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return v


def run_table(
    table,
    reps: int = 500,
    B: int = 199,
    c_list: Iterable[float] | None = None,
    n_list: Iterable[int] | None = None,
    dgps: Iterable[int] = DGP_MODELS,
    seed: int = 0,
    jobs: int = 1,
    base_config: TestConfig | None = None,
    progress: Callable[[str], None] | None = None,
) -> McReport:
    """Run every cell of a published table at the requested scale."""
    spec = table_spec(table)
    if reps < 1 or B < 1:
        raise ValueError("reps and B must be positive")
    c_list = tuple(float(c) for c in (spec.c_list if c_list is None else c_list))
    n_list = tuple(int(n) for n in (spec.n_list if n_list is None else n_list))
    dgps = tuple(dgps)
    if not c_list or not n_list or not dgps or min(c_list) <= 0 or min(n_list) < 1:
        raise ValueError("grid lists must be nonempty with positive entries")
    base = TestConfig() if base_config is None else base_config
    base = replace(base, error=spec.test_error(), case=spec.case, B=B, alphas=ALPHAS)

    rows = []
    pool = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for n in n_list:
            for c in c_list:
                config = replace(base, c=c)
                for k in dgps:
                    dgp = DgpSpec(model=k, n=n, error=spec.error, repeated=spec.estimated, seed=seed)
                    try:
                        cell = run_mc_cell(dgp, config, reps, jobs=jobs, executor=pool)
                    except DeconvoSpecError as exc:
                        raise type(exc)(f"table {table}, n={n}, c={c:g}, dgp={k}: {exc}") from exc
                    if progress:
                        progress(f"table {table} n={n} c={c:g} dgp={k} done ({cell.failures} failures)")
                    for a in config.alphas:
                        for stat in STATS:
                            rows.append(
                                {
                                    "table": str(table).lower(),
                                    "n": n,
                                    "c": c,
                                    "alpha": a,
                                    "dgp": k,
                                    "stat": stat,
                                    "rate": cell.rates[(stat, a)],
                                    "se": cell.se(stat, a),
                                    "reps": reps,
                                    "B": B,
                                    "failures": cell.failures,
                                }
                            )
    finally:
        if pool is not None:
            pool.shutdown()
    echo = {"case": spec.case, "error": spec.error, "estimated": spec.estimated, "seed": seed}
    return McReport(table=str(table).lower(), rows=rows, reps=reps, B=B, config=echo)
