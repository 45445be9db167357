from __future__ import annotations

import math

import numpy as np
import pytest

from uplift_eval import sim
from uplift_eval.transform import ht_transform, nuisance_truth


def test_aw_components_at_one_third():
    a, b = sim.raw_components("aw", np.array([[1 / 3, 1 / 3, 0.9, 0.1, 0.5, 0.5]]))
    assert a[0] == pytest.approx(1.125, abs=1e-15)
    assert b[0] == pytest.approx(2.25, abs=1e-15)


def test_nw_components_at_origin():
    a, b = sim.raw_components("nw", np.zeros((1, 6)))
    assert b[0] == pytest.approx(math.log(2), abs=1e-15)
    assert a[0] == pytest.approx(0.5 * math.log(2), abs=1e-15)


def test_nw_components_against_formula():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((100, 6))
    a, b = sim.raw_components("nw", X)
    for x, ai, bi in zip(X, a, b):
        sp = math.log1p(math.exp(x[1]))
        assert ai == pytest.approx(max(0, x[0] + x[1], x[2]) + max(0, x[3] + x[4]) + 0.5 * (x[0] + sp), rel=1e-12)
        assert bi == pytest.approx(x[0] + sp, rel=1e-12)


@pytest.mark.parametrize("setting", sim.SETTINGS)
def test_tau_sd_forced_to_scale(setting):
    _, truth = sim.generate(sim.SimWorld(setting, 0.5), 3000, 1)
    assert np.std(truth.tau, ddof=1) == pytest.approx(0.1, abs=1e-9)
    assert np.std(truth.nuisance, ddof=1) == pytest.approx(1.0, abs=1e-9)


def test_generate_errors():
    with pytest.raises(ValueError):
        sim.generate(sim.SimWorld(), 1, 0)
    with pytest.raises(ValueError):
        sim.SimWorld(setting="xx")
    with pytest.raises(ValueError):
        sim.SimWorld(sigma=0)


def test_batch_runs_deterministic_and_independent():
    w = sim.SimWorld("nw", 1.0)
    a = list(sim.batch_runs(w, 50, 30, 2, base_seed=9))
    b = list(sim.batch_runs(w, 50, 30, 2, base_seed=9))
    for ra, rb in zip(a, b):
        assert ra.train == rb.train and ra.test == rb.test
        np.testing.assert_array_equal(ra.truth.tau, rb.truth.tau)
    assert not np.array_equal(a[0].test.Y, a[1].test.Y)
    assert (a[0].train.n, a[0].test.n) == (50, 30)
    with pytest.raises(ValueError):
        list(sim.batch_runs(w, 50, 30, 0, 1))


@pytest.mark.parametrize("setting", sim.SETTINGS)
def test_treatment_balance_and_residuals(setting):
    world = sim.SimWorld(setting, 2.0)
    n = 50_000
    ds, truth = sim.generate(world, n, 3)
    assert abs(ds.W.mean() - 0.5) < 3 * math.sqrt(0.25 / n)
    mu_bar = truth.nuisance
    resid = ds.Y - mu_bar - (ds.W - 0.5) * truth.tau
    assert abs(resid.mean()) < 3 * world.sigma / math.sqrt(n)
    # sd of the sample sd of normals is about sigma / sqrt(2n)
    assert abs(resid.std(ddof=1) - world.sigma) < 3 * world.sigma / math.sqrt(2 * n)


def test_nuisance_truth_equals_mu_bar():
    world = sim.calibrate(sim.SimWorld("aw"), n=100_000)
    X = sim.draw_features(world, 500, sim.stream(4))
    a, _ = sim.raw_components("aw", X)
    # mu + 0.5 tau re-adds the term subtracted from mu_bar: equal up to rounding of that one addition
    np.testing.assert_allclose(nuisance_truth(world, X), a / world.norm_a, rtol=1e-15, atol=0)
    mu, tau = sim.true_effects(world, X)
    np.testing.assert_array_equal(nuisance_truth(world, X), mu + 0.5 * tau)


def test_true_effects_requires_calibration():
    with pytest.raises(ValueError):
        sim.true_effects(sim.SimWorld(), np.zeros((1, 6)))


@pytest.mark.parametrize("setting", sim.SETTINGS)
def test_transformed_outcome_unbiased_at_fixed_x(setting):
    world = sim.calibrate(sim.SimWorld(setting, 1.0), n=100_000)
    x = sim.draw_features(world, 1, sim.stream(5))
    mu, tau = sim.true_effects(world, x)
    rng = sim.stream(6)
    n = 200_000
    W = (rng.random(n) < 0.5).astype(float)
    Y = mu[0] + W * tau[0] + world.sigma * rng.standard_normal(n)
    t = ht_transform(W, Y, 0.5)
    assert abs(t.mean() - tau[0]) < 3 * t.std(ddof=1) / math.sqrt(n)


@pytest.mark.parametrize("setting", sim.SETTINGS)
def test_variance_components_match_theory(setting):
    """E[Var[W^pY|W]] and Var[E[W^pY|W]] against Var[tau] + (Var[Phi] + s^2)/(p(1-p)) and E[Phi]^2/(p(1-p))."""
    world = sim.calibrate(sim.SimWorld(setting, 1.0), n=100_000)
    p = 0.5
    reps, n = 300, 4000
    d_e, d_v = [], []
    for r in range(reps):
        rng = sim.stream(77, r)
        X = sim.draw_features(world, n, rng)
        W = (rng.random(n) < p).astype(int)
        mu, tau = sim.true_effects(world, X)
        Y = mu + W * tau + world.sigma * rng.standard_normal(n)
        T = ht_transform(W, Y, p)
        t1, t0 = T[W == 1], T[W == 0]
        ph = W.mean()
        v1, v0 = t1.var(ddof=1), t0.var(ddof=1)
        e_hat = ph * v1 + (1 - ph) * v0
        v_hat = ph * (1 - ph) * ((t1.mean() - t0.mean()) ** 2 - v1 / t1.size - v0 / t0.size)
        phi = mu + (1 - p) * tau
        e_true = tau.var(ddof=1) + (phi.var(ddof=1) + world.sigma ** 2) / (p * (1 - p))
        v_true = (phi.mean() ** 2 - phi.var(ddof=1) / n) / (p * (1 - p))
        d_e.append(e_hat - e_true)
        d_v.append(v_hat - v_true)
    for d in (np.array(d_e), np.array(d_v)):
        assert abs(d.mean()) < 3 * d.std(ddof=1) / math.sqrt(reps)
