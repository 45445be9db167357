from __future__ import annotations

import math

import numpy as np
import pytest

from uplift_eval import experiments, sim
from uplift_eval.experiments import StudyConfig

FAST = "kind=bagged_trees,trees=20,depth=5,min_leaf=10"


def small(**kw):
    base = dict(runs=6, n_train=400, n_test=300, seed=5, regressor=FAST, bootstrap=50, reference_n=20_000)
    base.update(kw)
    return StudyConfig(**base)


@pytest.fixture(scope="module")
def aw_runs():
    return experiments.collect_runs(sim.SimWorld("aw", 1.0), small())


def test_config_validation():
    with pytest.raises(ValueError):
        StudyConfig(runs=0)
    with pytest.raises(ValueError):
        StudyConfig(adjustments=("uc",))
    with pytest.raises(ValueError):
        StudyConfig(comparators=("best",))
    assert experiments.with_runs(StudyConfig(), 7).runs == 7


def test_parallel_map_keeps_order():
    assert experiments.parallel_map(abs, [-3, 1, -2, 5], threads=2) == [3, 1, 2, 5]
    assert experiments.worker_count(0) == 1


def test_reduction_pct():
    x = np.random.default_rng(0).standard_normal(50)
    assert experiments.reduction_pct(x, x)[0] == 0.0
    assert experiments.reduction_pct(x, 0.5 * x)[0] == pytest.approx(75.0)
    idx = np.random.default_rng(1).integers(0, 50, (200, 50))
    point, se, lo, hi = experiments.reduction_pct(x, 0.5 * x, idx)
    assert lo == pytest.approx(75.0) and hi == pytest.approx(75.0) and se < 1e-9


def test_variance_report_invariants(aw_runs):
    rep = experiments.variance_reduction_study(aw_runs.world, aw_runs.cfg, aw_runs)
    base = rep.get("variance", "delta_mse_w", "none").value
    for m in ("uc", "cond", "dr"):
        v = rep.get("variance", "delta_mse_w", m).value
        assert rep.get("reduction_pct", "delta_mse_w", m).value == pytest.approx(100 * (1 - v / base))
    assert rep.runs == 6 and rep.seed == 5
    assert "[reduction_pct]" in rep.text_table()


def test_uc_leaves_qini_values_unchanged(aw_runs):
    adjs = aw_runs.cfg.adjustments
    a, b = adjs.index("none"), adjs.index("uc")
    np.testing.assert_allclose(aw_runs.qini[:, b], aw_runs.qini[:, a], rtol=0, atol=1e-9)
    rep = experiments.variance_reduction_study(aw_runs.world, aw_runs.cfg, aw_runs)
    for s in aw_runs.cfg.shares:
        assert abs(rep.get("reduction_pct", "qini", "uc", share=s).value) < 1e-9


def test_misleading_shares_bounded(aw_runs):
    rep = experiments.misleading_share_study(aw_runs.world, aw_runs.cfg, aw_runs)
    rows = rep.select("misleading_pct")
    assert len(rows) == 3 * 4
    assert all(0 <= r.value <= 100 for r in rows)
    assert "truth" in rep.meta


def test_ties_are_not_misleading(aw_runs):
    tied = aw_runs._replace(cmp_delta=np.zeros_like(aw_runs.cmp_delta))
    rep = experiments.misleading_share_study(aw_runs.world, aw_runs.cfg, tied)
    assert all(r.value == 0.0 for r in rep.select("misleading_pct"))
    tied = aw_runs._replace(true_cmp=np.zeros_like(aw_runs.true_cmp))
    rep = experiments.misleading_share_study(aw_runs.world, aw_runs.cfg, tied)
    assert all(r.value == 0.0 for r in rep.select("misleading_pct"))


def test_worse_model_noise_scale():
    tau_hat = np.random.default_rng(2).standard_normal(200_000) * 3
    s = experiments._scores(tau_hat, np.zeros_like(tau_hat), sim.stream(3), 0.1)
    assert np.std(s["worse"] - tau_hat) == pytest.approx(0.1 * np.std(tau_hat, ddof=1), rel=0.01)
    np.testing.assert_array_equal(s["trivial"], 0.0)


def test_report_determinism_and_thread_invariance():
    w = sim.SimWorld("nw", 0.5)
    a = experiments.sim_study(w, small(runs=4))
    b = experiments.sim_study(w, small(runs=4))
    c = experiments.sim_study(w, small(runs=4, threads=2))
    for x, y, z in zip(a, b, c):
        assert x.csv_rows() == y.csv_rows() == z.csv_rows()


def test_fixed_harness_reports():
    cfg = small(runs=30)
    fr = experiments.collect_fixed_runs(sim.SimWorld("aw", 1.0), cfg)
    unb = experiments.unbiasedness_study(fr.fm.world, cfg, fr)
    cov = experiments.ci_coverage_study(fr.fm.world, cfg, fr)
    for m in cfg.adjustments:
        assert math.isfinite(unb.get("error", "delta_mse_w", m).value)
        assert 0 <= cov.get("coverage_pct", "delta_mse_w", m).value <= 100
        assert len(cov.select("coverage_pct", metric="ate_hat", adjustment=m)) == 10
    # the fixed model does not depend on the number of runs
    fr2 = experiments.collect_fixed_runs(sim.SimWorld("aw", 1.0), small(runs=5))
    assert fr2.fm.pop_delta == fr.fm.pop_delta
    np.testing.assert_array_equal(fr2.delta, fr.delta[:5])


def test_tau_risk_report():
    rep = experiments.tau_risk_study(sim.SimWorld("nw", 1.0), small(runs=5))
    assert rep.get("mean", "true_mse", comparator="pathological").value > 0
    share = rep.get("preferred_pct", "mse_tau", comparator="pathological_over_oracle").value
    assert 0 <= share <= 100


def test_real_data_study_on_simulated_table():
    ds, _ = sim.generate(sim.SimWorld("aw", 1.0), 1500, sim.stream(8))
    rep = experiments.real_data_study(ds, small(runs=2), test_fraction=0.3, name="sim")
    assert rep.setting == "sim"
    assert rep.get("reduction_pct", "delta_mse_w", "cond").value > 0
    assert abs(rep.get("reduction_pct", "qini", "uc", share=0.5).value) < 1e-6
