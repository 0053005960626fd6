import json

import pytest

from rcacusum import harness
from rcacusum.harness import (ExperimentSpec, RejectionTable, paper_preset, power_experiment, rep_seed,
                              size_experiment)
from rcacusum.simulate import ExplosiveOverflowError

SMALL = dict(betas=(0.5,), n_list=(100,), kappas=(0.0, 0.5, 1.0), cv_reps=2000, cv_grid=400, L=100)


class TestSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentSpec(reps=0)
        with pytest.raises(ValueError):
            ExperimentSpec(hetero_case="Het")
        with pytest.raises(ValueError):
            ExperimentSpec(break_kind="start")
        with pytest.raises(ValueError):
            ExperimentSpec(variance_mode="both")

    def test_default_preset(self):
        spec = paper_preset()
        assert spec.betas == (0.5, 0.75, 1.0, 1.05)
        assert spec.n_list == (200, 400, 800, 1600)
        assert 0.5 in spec.kappas and 0.51 in spec.kappas
        assert spec.deltas[0] == 0.05 and spec.deltas[-1] == 0.5
        assert paper_preset(reps=10).reps == 10

    def test_sim_spec_breaks(self):
        spec = ExperimentSpec(break_kind="mid", hetero_case="HomoHet2")
        sim = spec.sim_spec(0.5, 400, 0.2, seed=1)
        starts = [b.start(400) for b in sim.breaks]
        assert starts == sorted(starts)
        assert any(b.beta == pytest.approx(0.7) for b in sim.breaks)
        assert any(b.scale2 == 1.5 for b in sim.breaks)
        assert spec.sim_spec(0.5, 400, 0.0, seed=1).breaks == tuple(
            b for b in sim.breaks if b.beta is None)

    def test_asymptotic_mode_uses_closed_forms(self):
        spec = ExperimentSpec(variance_mode="homoskedastic", cv_mode="asymptotic")
        assert spec.config(0.0, 1).cv_source.kind == "analytic"
        assert spec.config(1.0, 1).cv_source.kind == "analytic"
        assert spec.config(0.75, 1).cv_source.kind == "simulated"

    def test_robust_fnl_seeded_per_rep(self):
        spec = ExperimentSpec()
        assert spec.config(0.0, 11).cv_source.seed == 11


class TestRuns:
    def test_single_rep_is_zero_or_one(self):
        table = size_experiment(ExperimentSpec(reps=1, **SMALL))
        assert set(table.cells.values()) <= {0.0, 1.0}
        assert len(table.cells) == 3

    def test_zero_delta_reproduces_size(self):
        base = ExperimentSpec(reps=30, **SMALL)
        size = size_experiment(base)
        power = power_experiment(ExperimentSpec(**{**base.__dict__, "break_kind": "mid",
                                                   "deltas": (0.0, 0.3)}))
        for kappa in SMALL["kappas"]:
            assert power.get(0.5, 100, kappa, 0.0) == size.get(0.5, 100, kappa)

    def test_workers_do_not_change_results(self):
        spec = ExperimentSpec(reps=20, **SMALL)
        one = size_experiment(spec)
        many = size_experiment(ExperimentSpec(**{**spec.__dict__, "workers": 4}))
        assert one.cells == many.cells

    def test_seed_changes_results(self):
        a = rep_seed(0, 0.5, 100, "HomoHomo", 0, 0)
        assert a == rep_seed(0, 0.5, 100, "HomoHomo", 0, 0)
        assert a != rep_seed(1, 0.5, 100, "HomoHomo", 0, 0)
        assert a != rep_seed(0, 0.5, 100, "HomoHomo", 1, 0)
        assert a != rep_seed(0, 0.5, 100, "HomoHomo", 0, 1)

    def test_size_rejects_break(self):
        with pytest.raises(ValueError):
            size_experiment(ExperimentSpec(break_kind="mid"))
        with pytest.raises(ValueError):
            power_experiment(ExperimentSpec())

    def test_overflow_redraws_counted(self, monkeypatch):
        real = harness.simulate_rca
        calls = {"n": 0}

        def flaky(sim):
            calls["n"] += 1
            if calls["n"] % 2 == 1:
                raise ExplosiveOverflowError(5, 1e308)
            return real(sim)

        monkeypatch.setattr(harness, "simulate_rca", flaky)
        table = size_experiment(ExperimentSpec(reps=6, **{**SMALL, "kappas": (0.0,)}))
        assert table.overflow_redraws == 6

    def test_persistent_overflow_raises(self, monkeypatch):
        def always(sim):
            raise ExplosiveOverflowError(5, 1e308)

        monkeypatch.setattr(harness, "simulate_rca", always)
        with pytest.raises(RuntimeError, match="overflowing"):
            size_experiment(ExperimentSpec(reps=1, **SMALL))


class TestTable:
    def table(self):
        return RejectionTable({(0.5, 200, 0.0, 0.0): 0.05, (0.5, 400, 0.0, 0.0): 0.04,
                               (0.5, 200, 1.0, 0.0): 0.06, (0.5, 400, 1.0, 0.0): 0.055},
                              reps=1000)

    def test_half_width(self):
        t = self.table()
        assert t.half_width((0.5, 200, 0.0, 0.0)) == pytest.approx(1.96 * (0.05 * 0.95 / 1000) ** 0.5)
        assert t.tolerance((0.5, 200, 0.0, 0.0)) == pytest.approx(2 * t.half_width((0.5, 200, 0.0, 0.0)))
        assert t.tolerance((0.5, 200, 0.0, 0.0), floor=0.05) == 0.05

    def test_delimited_layout(self):
        rows = self.table().to_delimited().strip().splitlines()
        assert rows[0].split(",")[0] == "beta"
        assert rows[2] == "N,200,400"
        assert rows[3] == "0,0.050,0.040"
        assert rows[4] == "1,0.060,0.055"

    def test_json_round_trip(self):
        t = self.table()
        back = RejectionTable.from_dict(json.loads(t.to_json()))
        assert back.cells == t.cells
        assert back.reps == t.reps
