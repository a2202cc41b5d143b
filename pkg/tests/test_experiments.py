import json
import math
import time

import numpy as np
import pytest

from profilecov import experiments as ex
from profilecov import montecarlo as mc


@pytest.fixture(scope="module")
def fig1():
    return ex.figure1_sweep()


@pytest.fixture(scope="module")
def fig2():
    return ex.figure2_sweep()


@pytest.fixture(scope="module")
def fig3():
    return ex.figure3_sweep(ms=(1, 2, 5), radii=(100.0, 300.0))


@pytest.fixture(scope="module")
def fig4():
    return ex.figure4_sweep()


def test_log_grid_density():
    grid = ex.log_grid(1e-7, 1e-3)
    assert len(grid) == 4 * 60 + 1
    assert grid[0] == pytest.approx(1e-7) and grid[-1] == pytest.approx(1e-3)


class TestFigure1:
    def test_no_profile_rows_match_baseline(self, fig1):
        rows = fig1.table.where(w=math.inf)
        assert rows.rows
        assert rows.column("nu_tau") == rows.column("nu_0")

    def test_eta_at_least_one(self, fig1):
        assert min(fig1.table.column("eta")) >= 1.0

    def test_required_density(self, fig1):
        assert fig1.summary_value("required_density", w=0.01) == pytest.approx(5.3220255084120905e-6, rel=1e-12)
        assert fig1.summary_value("required_density", w=None, tau=0.0) == pytest.approx(8.0046874801058773e-5,
                                                                                       rel=1e-12)
        notes = [e["note"] for e in fig1.summary if e["parameters"].get("w") == 0.01]
        assert any("82/km^2 -> 8/km^2" in n for n in notes)

    def test_cif_target(self, fig1):
        assert fig1.summary_value("cif_target_density", w=0.01) > 0
        assert fig1.summary_value("cif_target_density", w=None) is None


class TestFigure2:
    def test_vacancy_complements_saf(self, fig2):
        from profilecov.analytics import ScenarioParams, saf
        for lam, vac in zip(fig2.table.where(m=1).column("lambda"), fig2.table.where(m=1).column("vacancy_tau")):
            assert vac + saf(ScenarioParams.build(lam, 150.0, 5.0)) == pytest.approx(1.0, abs=1e-15)

    def test_monotone_in_m(self, fig2):
        by_m = {m: fig2.table.where(m=m).column("nu_m_tau") for m in (1, 2, 3, 5)}
        for lo, hi in ((1, 2), (2, 3), (3, 5)):
            assert all(a <= b + 1e-15 for a, b in zip(by_m[lo], by_m[hi]))

    def test_optimum_reached_earlier_with_tolerance(self, fig2):
        with_tol = fig2.summary_value("at_most_m_saf_argmax", m=5, with_tolerance=True)
        without = fig2.summary_value("at_most_m_saf_argmax", m=5, with_tolerance=False)
        assert with_tol < without


class TestFigure3:
    def test_maximum_independent_of_region(self, fig3):
        a = fig3.summary_value("optimal_density", m=1, r=100.0)
        b = fig3.summary_value("optimal_density", m=1, r=300.0)
        assert b < a
        t100, t300 = fig3.tables["figure3_r100"], fig3.tables["figure3_r300"]
        assert len(t100.rows) == len(t300.rows)

    @pytest.mark.parametrize("m", [1, 2, 5])
    @pytest.mark.parametrize("r", [100.0, 300.0])
    def test_argmax_near_optimal_density(self, fig3, m, r):
        note = next(e["note"] for e in fig3.summary
                    if e["metric"] == "mu_m_grid_argmax" and e["parameters"] == {"m": m, "r": r, "tau": 5.0})
        assert note.endswith("within one grid step: True")

    def test_pmf_sums_to_one_per_density(self):
        from profilecov.analytics import ScenarioParams, m_intersection_prob, truncated_sum
        for lam in (1e-8, 1e-6, 1e-4):
            p = ScenarioParams.build(lam, 150.0, 5.0, r=100.0)
            assert truncated_sum(lambda m: m_intersection_prob(m, p), p.intersection_mean) == pytest.approx(1.0)


class TestFigure4:
    def test_no_cover_beyond_native_radius_without_tolerance(self, fig4):
        rows = fig4.table.where(tau=0.0)
        for r, beta in zip(rows.column("r"), rows.column("beta_m_tau")):
            if r > 150:
                assert beta == 0.0

    def test_largest_coverable_radius(self, fig4):
        largest = fig4.summary_value("largest_coverable_r", tau=5.0)
        assert 310.0 <= largest < 310.9437912434100375
        assert fig4.summary_value("largest_coverable_r", tau=0.0) < 150.0

    def test_cover_sum_below_intersection_sum(self):
        from profilecov import analytics as an
        from profilecov.analytics import ScenarioParams
        for r in (0.0, 100.0, 250.0, 400.0):
            p = ScenarioParams.build(1e-4, 150.0, 5.0, r=r)
            assert an.cover_prob(p) <= an.intersection_prob(p)


def test_figures_are_fast_and_byte_stable(tmp_path):
    for n, fn in ex.FIGURES.items():
        start = time.perf_counter()
        first = fn()
        assert time.perf_counter() - start < 1.0
        a = first.write(tmp_path / f"a{n}")
        b = fn().write(tmp_path / f"b{n}")
        for pa, pb in zip(a, b):
            assert pa.read_bytes() == pb.read_bytes()


def test_csv_format(tmp_path):
    table = ex.Table(("name", "x", "k"))
    table.add('a,"b"', 0.1, 3)
    text = table.to_csv()
    assert text == 'name,x,k\r\n"a,""b""",1.000000000000e-01,3\r\n'
    path = table.write_csv(tmp_path / "t.csv")
    assert path.read_bytes() == text.encode("utf-8")


class TestSweepSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ex.SweepSpec("lambda", [], {})
        with pytest.raises(ValueError):
            ex.SweepSpec("lambda", [1e-6, 1e-6], {})
        with pytest.raises(ValueError):
            ex.SweepSpec("lambda", [1e-6, 1e-5], {"lambda": 1e-6})
        with pytest.raises(ValueError):
            ex.SweepSpec("speed", [1, 2], {})
        with pytest.raises(ValueError):
            ex.SweepSpec("r", [1, 2], {"colour": 1})

    def test_range_grid(self):
        spec = ex.SweepSpec.from_dict({"variable": "lambda",
                                       "grid": {"start": 1e-7, "stop": 1e-4, "num": 4, "scale": "log"}})
        assert spec.grid == pytest.approx([1e-7, 1e-6, 1e-5, 1e-4])

    def test_w_sweep_includes_no_profile(self):
        spec = ex.SweepSpec("w", [0.01, 0.05, None], {"lambda": 1e-5, "rs": 80.0, "tau": 10.0, "r": 0.0})
        result = ex.run_sweep(spec)
        eta = result.table.column("eta")
        assert eta[-1] == 1.0 and eta[0] > eta[1] > 1.0

    def test_m_sweep(self):
        spec = ex.SweepSpec("m", [1, 2, 3], {"lambda": 1e-5})
        table = ex.run_sweep(spec).table
        assert table.columns[-3:] == ("nu_m", "mu_m", "beta_m")
        assert table.column("nu_m") == sorted(table.column("nu_m"))

    def test_monte_carlo_overlay(self):
        spec = ex.SweepSpec("r", [0.0, 100.0], {"lambda": 2e-5, "rs": 150.0, "tau": 5.0}, monte_carlo=True,
                            simulation={"replications": 20, "test_points": 400, "half_width": 800.0, "seed": 1})
        table = ex.run_sweep(spec).table
        for row in table.rows:
            rec = dict(zip(table.columns, row))
            assert abs(rec["nu_mc"] - rec["nu"]) <= 4 * rec["nu_mc_se"]


class TestValidationGrid:
    sim = mc.SimulationConfig(replications=6, test_points=400, half_width=600.0, seed=4)

    def test_shape_and_determinism(self):
        a = ex.validation_grid(self.sim)
        b = ex.validation_grid(self.sim)
        assert len(a.cells) == 48
        assert a.to_table().to_csv() == b.to_table().to_csv()
        assert a.to_json() == b.to_json()
        json.loads(a.to_json())

    def test_zero_density_scenario(self):
        from profilecov.analytics import ScenarioParams
        cells = ex.validate_scenario(ScenarioParams.build(0.0, 80.0, 5.0, r=50.0), self.sim)
        for cell in cells:
            assert cell.standard_error == 0.0
            assert cell.estimate == cell.closed_form == 0.0
            assert cell.z == 0.0
