import csv
import io

import numpy as np
import pytest

from deconvospec.engine import TestConfig
from deconvospec.simulation import (
    REPORT_COLUMNS,
    DgpSpec,
    McReport,
    run_mc_cell,
    run_table,
    simulate_dgp,
    table_spec,
)


class TestDgp:
    def test_zero_delta_reproduces_null(self):
        base = simulate_dgp(DgpSpec(model=0, n=50, seed=3, repeated=True))
        for k in (1, 2):
            other = simulate_dgp(DgpSpec(model=k, delta=0.0, n=50, seed=3, repeated=True))
            for a, b in zip(base, other):
                np.testing.assert_array_equal(a, b)

    def test_regressor_shared_across_models(self):
        a = simulate_dgp(DgpSpec(model=0, n=40, seed=1))
        b = simulate_dgp(DgpSpec(model=2, n=40, seed=1))
        np.testing.assert_array_equal(a[1], b[1])
        assert a[2] is None

    @pytest.mark.parametrize("error", ["laplace_var_1_12", "gaussian_var_1_12"])
    def test_variance_of_w(self, error):
        _, w, wr = simulate_dgp(DgpSpec(n=10**6, error=error, repeated=True, seed=2))
        se = np.sqrt(2.0 / 10**6) * 1.1
        assert w.var() == pytest.approx(1 + 1 / 12, abs=4 * se)
        assert np.var(w - wr) == pytest.approx(2 / 12, abs=4e-3)

    def test_mean_of_y_dgp1(self):
        y, _, _ = simulate_dgp(DgpSpec(model=1, n=10**6, seed=4))
        assert y.mean() == pytest.approx(1.5, abs=4e-3)

    def test_mean_of_y_dgp2(self):
        # E cos(pi X) = exp(-pi^2 / 2)
        y, _, _ = simulate_dgp(DgpSpec(model=2, n=10**6, seed=4))
        assert y.mean() == pytest.approx(1 + 0.5 * np.exp(-(np.pi**2) / 2), abs=4e-3)

    @pytest.mark.parametrize("kw", [{"model": 3}, {"n": 0}, {"error": "cauchy"}])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            DgpSpec(**kw)


class TestCell:
    def test_single_rep(self):
        cell = run_mc_cell(DgpSpec(n=100), TestConfig(B=19), reps=1)
        assert all(r in (0.0, 1.0) for r in cell.rates.values())
        assert cell.failures == 0

    def test_reps_rejected(self):
        with pytest.raises(ValueError):
            run_mc_cell(DgpSpec(n=100), TestConfig(B=19), reps=0)

    def test_standard_error(self):
        cell = run_mc_cell(DgpSpec(model=2, n=100), TestConfig(B=19), reps=8)
        p = cell.rates[("ks", 0.05)]
        assert cell.se("ks", 0.05) == pytest.approx(np.sqrt(p * (1 - p) / 8))

    def test_jobs_do_not_change_results(self):
        dgp, cfg = DgpSpec(model=1, n=100, seed=5), TestConfig(B=19)
        a = run_mc_cell(dgp, cfg, reps=6, jobs=1)
        b = run_mc_cell(dgp, cfg, reps=6, jobs=2)
        assert a.rates == b.rates


class TestTable:
    def test_grid_shape(self):
        spec = table_spec(1)
        assert len(spec.n_list) * len(spec.c_list) * 3 * 3 * 2 == 2 * 6 * 3 * 3 * 2

    def test_unknown_tables_use_repeated_measurements(self):
        for t in ("3", "4", "a9", "a10", "a11", "a12"):
            assert table_spec(t).estimated
            assert table_spec(t).test_error() == "estimated"
        assert not table_spec("a7").estimated and table_spec("a7").case == "super"

    def test_unknown_table(self):
        with pytest.raises(ValueError):
            table_spec("7")

    def test_reps_zero_rejected(self):
        with pytest.raises(ValueError):
            run_table(1, reps=0)

    def test_small_run_and_csv(self):
        rep = run_table("3", reps=2, B=9, c_list=[1.0], n_list=[60], dgps=[0, 2], seed=3)
        assert len(rep.rows) == 1 * 1 * 3 * 2 * 2
        assert all(0.0 <= r["rate"] <= 1.0 and r["failures"] == 0 for r in rep.rows)
        text = rep.to_csv()
        rows = list(csv.DictReader(io.StringIO(text)))
        assert tuple(rows[0]) == REPORT_COLUMNS
        row = next(r for r in rows if (r["dgp"], r["alpha"], r["stat"]) == ("2", "0.05", "cvm"))
        assert rep.rate(60, 1.0, 0.05, 2, "cvm") == float(row["rate"])
        again = run_table("3", reps=2, B=9, c_list=[1.0], n_list=[60], dgps=[0, 2], seed=3)
        assert again.to_csv() == text
        assert isinstance(rep, McReport)
