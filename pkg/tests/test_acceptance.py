"""Acceptance criteria 1-8, each printed as one PASS/FAIL line in the summary.

Monte Carlo cells run at desk scale (500 replications, B = 199, master
seed 1), the same cells ``deconvospec simulate --table T --reps 500 --seed 1``
produces.
"""

import math

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from deconvospec.eiv import ParametricModel, als_fit, corrected_monomial
from deconvospec.engine import TestConfig, bootstrap_distribution, cvm_stat, ks_stat
from deconvospec.error_model import Estimated, KnownGaussian, KnownLaplace
from deconvospec.kernel import DeconvKernelSpec, moment_table
from deconvospec.projection import (
    Sample,
    XiGrid,
    build_projection,
    monomial_integrals,
    projected_psi,
    raw_integrals,
    residual_mark_mean,
    s_pro,
)
from deconvospec.simulation import ALPHAS, DgpSpec, run_mc_cell, table_spec

REPS, B, SEED = 500, 199, 1
ALPHA = 0.05
LAP = KnownLaplace(1 / 24)
GAU = KnownGaussian(1 / 24)

_cells = {}


def cell(table, n, c, dgp):
    key = (table, n, c, dgp)
    if key not in _cells:
        spec = table_spec(table)
        config = TestConfig(error=spec.test_error(), case=spec.case, c=c, B=B, alphas=ALPHAS)
        d = DgpSpec(model=dgp, n=n, error=spec.error, repeated=spec.estimated, seed=SEED)
        _cells[key] = run_mc_cell(d, config, REPS)
    return _cells[key]


def report(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def size_check(number, table):
    res = cell(table, 500, 5.0, 0)
    ks, cvm = res.rates[("ks", ALPHA)], res.rates[("cvm", ALPHA)]
    ok = abs(ks - ALPHA) <= 0.03 and abs(cvm - ALPHA) <= 0.03 and res.failures == 0
    return report(number, ok, f"table {table} size n=500 c=5: KS {ks:.3f} CvM {cvm:.3f} (need 0.05 +- 0.03), failures {res.failures}")


@pytest.mark.slow
def test_criterion_1_known_laplace_size():
    assert size_check(1, "1")


@pytest.mark.slow
def test_criterion_2_known_gaussian_size():
    assert size_check(2, "2")


PUBLISHED_POWER = {  # table 1, c = 5, alpha = 0.05: (KS, CvM)
    (500, 1): (0.835, 0.818),
    (500, 2): (0.779, 0.769),
    (1000, 1): (0.977, 0.968),
    (1000, 2): (0.966, 0.955),
}


@pytest.mark.slow
def test_criterion_3_power():
    parts, ok = [], True
    for dgp in (1, 2):
        small, large = cell("1", 500, 5.0, dgp), cell("1", 1000, 5.0, dgp)
        for j, stat in enumerate(("ks", "cvm")):
            r5, r10 = small.rates[(stat, ALPHA)], large.rates[(stat, ALPHA)]
            near = abs(r5 - PUBLISHED_POWER[(500, dgp)][j]) <= 0.10
            grows = r10 > r5
            ok &= near and grows
            parts.append(f"DGP{dgp} {stat} {r5:.3f} (published {PUBLISHED_POWER[(500, dgp)][j]:.3f}) -> n=1000 {r10:.3f}")
    assert report(3, ok, "; ".join(parts))


@pytest.mark.slow
def test_criterion_4_unknown_laplace_size():
    assert size_check(4, "3")


@pytest.mark.slow
def test_criterion_5_bandwidth_robustness():
    parts, ok = [], True
    for table in ("1", "2", "3", "4"):
        for stat in ("ks", "cvm"):
            rates = [cell(table, 500, c, 0).rates[(stat, ALPHA)] for c in (1.0, 5.0, 10.0)]
            spread = max(rates) - min(rates)
            ok &= spread <= 0.05
            parts.append(f"T{table} {stat} {spread:.3f}")
    assert report(5, ok, "size spread over c in {1,5,10} (need <= 0.05): " + ", ".join(parts))


def _dgp0_sample(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    return Sample(1 + x + rng.normal(0, 0.5, n), x + rng.laplace(0, math.sqrt(1 / 24), n))


def test_criterion_6_exact_identities():
    checks = {}
    b = 0.7
    for name, m in (("laplace", LAP), ("gaussian", GAU)):
        z = moment_table(DeconvKernelSpec(b, m), [], order=4).at_zero
        checks[f"m0(0) {name}"] = abs(z[0] - 1) <= 1e-8
        checks[f"b^2 m2(0) {name}"] = abs(b**2 * z[2] + m.sigma2) <= 1e-6

    s = _dgp0_sample(400, 1)
    for degree in (1, 2):
        theta = als_fit(s.y, s.w, degree, LAP.moments()).theta_hat
        model = ParametricModel(theta)
        xi = XiGrid().clipped(b)
        table = moment_table(DeconvKernelSpec(b, LAP), xi.nodes, order=2 * degree)
        comps = build_projection(s, model, table)
        zero, grid = monomial_integrals(s.w, table, 2 * degree)
        idx = np.add.outer(np.arange(degree + 1), np.arange(degree + 1))
        resid = grid[:, : degree + 1].mean(axis=0) - zero[:, idx].mean(axis=0) @ comps.beta
        checks[f"orthogonality d={degree}"] = np.abs(resid).max() <= 1e-8
        h = np.array([corrected_monomial(k, s.w, LAP.moments()).mean() for k in range(2 * degree + 1)])
        checks[f"Delta=H d={degree}"] = np.abs(comps.Delta - h[idx]).max() <= 1e-6

        off = ParametricModel(theta + 0.1)  # M_n != 0 away from the fit
        c_off = build_projection(s, off, table)
        cache = projected_psi(s, off, c_off, table)
        route2 = raw_integrals(s, off, table).mean(axis=0) - residual_mark_mean(s, off, table) @ c_off.beta
        checks[f"two-route d={degree}"] = np.abs(s_pro(cache) - route2).max() <= 1e-10

        cache = projected_psi(s, model, comps, table)
        ks, cvm = bootstrap_distribution(cache, TestConfig(B=5), xi, multipliers=np.ones((5, s.n)))
        sp = s_pro(cache)
        checks[f"V=1 d={degree}"] = bool(np.all(ks == ks_stat(sp, s.n)) and np.all(cvm == cvm_stat(sp, xi, s.n)))

    failed = [k for k, v in checks.items() if not v]
    assert report(6, not failed, f"{len(checks) - len(failed)}/{len(checks)} identities hold" + (f"; failed {failed}" if failed else ""))


def _brute_force(y, w, theta, spec, xi, u_max=400.0, h=0.1):
    u = np.arange(-u_max, u_max + h / 2, h)
    k = spec.kernel(u)
    x = w + spec.b * u
    resid = y - np.polynomial.polynomial.polyval(x, theta)
    return (resid * k) @ np.exp(1j * np.multiply.outer(x, xi)) * h


def test_criterion_7_oracles():
    worst_raw = 0.0
    for instance in range(25):
        rng = np.random.default_rng(7000 + instance)
        b = rng.uniform(0.3, 1.0)
        spec = DeconvKernelSpec(b, KnownLaplace(rng.uniform(0.005, 0.06)))
        theta = rng.normal(0, 1, 3)
        y, w = rng.normal(1, 1), rng.normal(0, 1.2)
        xi = rng.uniform(-0.9, 0.9, 4) / b
        got = raw_integrals(Sample([y], [w]), ParametricModel(theta), moment_table(spec, xi, order=2))[0]
        want = _brute_force(y, w, theta, spec, xi)
        worst_raw = max(worst_raw, np.abs(got - want).max() / np.abs(want).max())

    spec = DeconvKernelSpec(0.7, LAP)
    xi = np.linspace(-1.3, 1.3, 27)
    d = moment_table(spec, xi, order=4, method="derivative").values
    q = moment_table(spec, xi, order=4, method="quadrature").values
    worst_dual = float(np.max(np.abs(d - q) / np.abs(d).max(axis=1, keepdims=True)))

    t = np.linspace(0.5, 8.0, 16)
    truth = LAP.cf(t)
    errs = []
    for n in (10**3, 10**4, 10**5):
        e = []
        for seed in range(5):
            rng = np.random.default_rng([seed, n, 7])
            dd = rng.laplace(0, math.sqrt(1 / 24), n) - rng.laplace(0, math.sqrt(1 / 24), n)
            e.append(np.abs(Estimated(dd, ridge_floor=0.0).cf(t) - truth).mean())
        errs.append(float(np.mean(e)))
    monotone = errs[0] > errs[1] > errs[2]

    ok = worst_raw <= 1e-4 and worst_dual <= 1e-5 and monotone
    detail = (
        f"raw vs brute force {worst_raw:.1e} (<= 1e-4), derivative vs quadrature {worst_dual:.1e} (<= 1e-5), "
        f"CF error n=1e3,1e4,1e5: {errs[0]:.4f} > {errs[1]:.4f} > {errs[2]:.4f}"
    )
    assert report(7, ok, detail)


@pytest.mark.slow
def test_criterion_8_covered_by_size_cells():
    """The limit laws have no closed form; bootstrap size at alpha is their observable consequence."""
    ok = all(size_check(k, t) for k, t in ((1, "1"), (2, "2"), (4, "3")))
    assert report(8, ok, "asymptotic null laws checked indirectly through the size cells of criteria 1, 2 and 4")
