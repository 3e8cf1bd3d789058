import math
import warnings
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hindsight import bootstrap
from hindsight.bootstrap import (
    BootstrapConfig, NegligibilityWarning, accepts, benchmark_scores, benchmark_stats,
    check_negligibility, confidence_set, critical_value, modified_stats, multipliers,
    negligibility_diagnostic, profile_cs, subvector_cs, theta_grid,
)
from hindsight.errors import ConfigError
from hindsight.game import GameDesign, ThetaParams, simulate_game
from hindsight.moments import evaluate_moments

from conftest import make_data


def simulated(phi=0.0, sizes=(10, 100), seed=3, rep=0):
    theta = ThetaParams(1.0, phi)
    return simulate_game(theta, GameDesign.uniform(*sizes, seed=seed), replication=rep).public()


def test_zero_instruments_give_zero_stats():
    data = make_data([1, 0, 1], [0.1, 0.2, 0.3], [0, 0, 0])
    stats = benchmark_stats(data, np.zeros((3, 2)), BootstrapConfig(B=50))
    np.testing.assert_array_equal(stats, 0.0)


def test_constant_actions_center_to_zero():
    data = make_data([1, 1, 1, 1], [0.1, -0.2, 0.3, 2.0], [0, 0, 1, 1])
    ones = np.ones((4, 1))
    np.testing.assert_array_equal(benchmark_scores(data, ones), 0.0)
    np.testing.assert_array_equal(benchmark_stats(data, ones, BootstrapConfig(B=20)), 0.0)


def test_benchmark_mean_matches_second_moment():
    data = simulated(sizes=(3, 10))
    cfg = BootstrapConfig(B=100_000, seed=5)
    stats = benchmark_stats(data, config=cfg)
    z = benchmark_scores(data)
    expected = np.sum(z * z) / data.num_players
    se = stats.std(ddof=1) / math.sqrt(cfg.B)
    assert abs(stats.mean() - expected) <= 3 * se


def residual_system(r_u, r_l, g):
    return SimpleNamespace(r_U=np.asarray(r_u, float), r_L=np.asarray(r_l, float),
                           instruments=np.asarray(g, float), num_players=len(r_u))


def test_zero_residuals_give_zero_modified_stats():
    ms = residual_system(np.zeros(5), np.zeros(5), np.ones((5, 2)))
    eps = np.random.default_rng(0).standard_normal((5, 30))
    np.testing.assert_array_equal(modified_stats(ms, eps), 0.0)


def test_equal_residuals_give_squared_norm():
    gen = np.random.default_rng(1)
    r = gen.standard_normal(8)
    g = np.abs(gen.standard_normal((8, 3)))
    eps = gen.standard_normal((8, 40))
    star = ((r[:, None] * g).T @ eps) / 8
    expected = 8 * np.sum(star * star, axis=0)
    np.testing.assert_allclose(modified_stats(residual_system(r, r, g), eps), expected, rtol=1e-14)


def test_modified_dominated_by_benchmark_at_zero_interaction():
    # With negligible regrets the benchmark critical value should not be lower.
    wins = 0
    for rep in range(40):
        data = simulated(rep=rep)
        cfg = BootstrapConfig(B=300, seed=rep)
        eps = multipliers(data.num_players, cfg)
        ms = evaluate_moments(data, ThetaParams(1.0, 0.0))
        bench = critical_value(benchmark_stats(data, config=cfg, eps=eps), cfg.alpha, ms.tau_theta)
        mod = critical_value(modified_stats(ms, eps), cfg.alpha, ms.tau_theta)
        wins += bench >= mod
    assert wins / 40 >= 0.95


def test_modified_stats_below_benchmark_at_quantiles():
    data = simulated(rep=7)
    cfg = BootstrapConfig(B=2000, seed=7)
    eps = multipliers(data.num_players, cfg)
    ms = evaluate_moments(data, ThetaParams(1.0, 0.0))
    q = [0.5, 0.75, 0.9, 0.95, 0.99]
    bench = np.quantile(benchmark_stats(data, config=cfg, eps=eps), q)
    mod = np.quantile(modified_stats(ms, eps), q)
    assert np.all(mod <= bench)


@pytest.mark.parametrize("stats, alpha, tau, expected", [
    ([1, 2, 3, 4, 5], 0.05, 0.01, 5),
    ([3, 1, 2, 5, 4], 0.5, 0.0, 3),
    ([7.5] * 9, 0.1, 0.0, 7.5),
    (np.arange(1, 1001), 0.05, 0.0, 950),
    (np.arange(1, 1001), 0.05, 0.01, 960),
])
def test_critical_value(stats, alpha, tau, expected):
    assert critical_value(stats, alpha, tau) == expected


def test_quantile_level_above_one_rejected():
    with pytest.raises(ConfigError):
        critical_value([1.0, 2.0], 0.01, 0.02)


@given(st.lists(st.floats(0, 100), min_size=1, max_size=60), st.floats(0.01, 0.5),
       st.floats(0.0, 0.01))
def test_critical_value_monotone_in_level(stats, alpha, tau):
    assert critical_value(stats, alpha, tau) >= critical_value(stats, alpha, 0.0)
    assert critical_value(stats, alpha / 2, 0.0) >= critical_value(stats, alpha, 0.0)


@pytest.mark.parametrize("kwargs", [
    dict(B=0), dict(alpha=1.0), dict(epsilon_floor=0.0), dict(method="bayes"),
    dict(eta=0.0), dict(link="cauchit"), dict(seed=-1), dict(instruments=("cube",)),
])
def test_config_validation(kwargs):
    with pytest.raises((ConfigError, ValueError)):
        BootstrapConfig(**kwargs)


def test_accept_rule_on_grid(small_game):
    grid = theta_grid(ThetaParams(1.0, 0.5), np.linspace(0, 2, 5), np.linspace(-1, 1.5, 6))
    for method in ("benchmark", "modified", "ignore_regret"):
        res = confidence_set(small_game.public(), grid, config=BootstrapConfig(B=100, method=method))
        assert res.T.size == 30
        np.testing.assert_array_equal(res.accept, res.T <= np.maximum(res.crit, res.epsilon_floor))
        assert res.ignore_regret == (method == "ignore_regret")


def test_floor_accepts_when_statistics_vanish():
    # Everyone chooses 1 with large covariates: the benchmark draws are all 0
    # and the upper bound is saturated, so T = 0 and only the floor applies.
    data = make_data([1] * 6, [5.0, 6.0, 5.5, 7.0, 6.5, 8.0], [0, 0, 0, 1, 1, 1])
    cfg = BootstrapConfig(B=50, method="benchmark", instruments=("one",))
    res = confidence_set(data, [ThetaParams(2.0, 0.0), ThetaParams(1.0, 0.0)], config=cfg)
    np.testing.assert_array_equal(res.crit, 0.0)
    assert res.T[0] == 0.0
    # Upper bound a hair below one leaves T positive but under the floor.
    assert 0.0 < res.T[1] <= cfg.epsilon_floor
    assert res.accept.all()


def test_empty_grid_rejected(small_game):
    with pytest.raises(ConfigError):
        confidence_set(small_game, [])


def test_benchmark_draws_reused_across_grid(small_game, monkeypatch):
    calls = []
    original = bootstrap.benchmark_stats
    monkeypatch.setattr(bootstrap, "benchmark_stats", lambda *a, **k: calls.append(1) or original(*a, **k))
    grid = theta_grid(ThetaParams(1.0, 0.5), [0.5, 1.0, 1.5], [0.0, 0.5])
    confidence_set(small_game, grid, config=BootstrapConfig(B=50, method="benchmark"))
    assert len(calls) == 1
    confidence_set(small_game, grid, config=BootstrapConfig(B=50, method="benchmark", redraw=True))
    assert len(calls) == 1 + 6


def test_same_seed_same_result(small_game):
    grid = theta_grid(ThetaParams(1.0, 0.5), [0.8, 1.2], [0.2, 0.6])
    a = confidence_set(small_game, grid, config=BootstrapConfig(B=80, seed=4))
    b = confidence_set(small_game, grid, config=BootstrapConfig(B=80, seed=4))
    c = confidence_set(small_game, grid, config=BootstrapConfig(B=80, seed=5))
    np.testing.assert_array_equal(a.crit, b.crit)
    assert not np.array_equal(a.crit, c.crit)


def test_single_nuisance_point_matches_joint_test(small_game):
    base = ThetaParams(1.0, 0.5)
    phis = [-0.5, 0.0, 0.5, 1.0]
    cfg = BootstrapConfig(B=100, seed=2)
    sub = subvector_cs(small_game, phis, [1.0], base, config=cfg)
    joint = confidence_set(small_game, theta_grid(base, [1.0], phis), config=cfg)
    for name in ("T", "crit", "accept", "phi", "beta"):
        np.testing.assert_array_equal(getattr(sub, name), getattr(joint, name))
    assert sub.kind == "profile_phi"


@pytest.mark.parametrize("rep", range(4))
def test_subvector_takes_separate_infima(rep):
    data = simulated(phi=0.5, sizes=(4, 30), rep=rep)
    base = ThetaParams(1.0, 0.5)
    betas = np.linspace(0.0, 2.0, 5)
    phis = np.linspace(-1.0, 1.5, 6)
    cfg = BootstrapConfig(B=100, seed=rep)
    joint = confidence_set(data, theta_grid(base, betas, phis), config=cfg)
    sub = subvector_cs(data, phis, betas, base, config=cfg)
    for k, phi in enumerate(phis):
        at = joint.phi == phi
        assert sub.T[k] == joint.T[at].min()
        assert sub.crit[k] == joint.crit[at].min()
        # The minimizing nuisance value is then accepted by the joint test.
        if sub.accept[k]:
            best = at & (joint.beta == sub.beta[k])
            assert joint.accept[best].all()


def test_profile_beta_kind(small_game):
    res = profile_cs(small_game, "beta", [0.5, 1.0], [0.0, 0.5], ThetaParams(1.0, 0.5),
                     config=BootstrapConfig(B=40))
    assert res.kind == "profile_beta"
    np.testing.assert_array_equal(res.beta, [0.5, 1.0])
    with pytest.raises(ConfigError):
        profile_cs(small_game, "gamma", [0.0], [0.0], ThetaParams(1.0, 0.5))


def test_zero_variations_zero_negligibility():
    ms = SimpleNamespace(negligibility=lambda: np.sum(np.zeros((5, 3)) ** 2, axis=0))
    np.testing.assert_array_equal(negligibility_diagnostic(ms), 0.0)
    ms = evaluate_moments(simulated(phi=0.0, sizes=(2, 10)), ThetaParams(1.0, 0.0))
    np.testing.assert_array_equal(ms.negligibility(), 0.0)


def test_negligibility_shrinks_with_group_size():
    theta = ThetaParams(1.0, 0.5)
    sums = []
    for n in (100, 200):
        data = simulate_game(theta, GameDesign.uniform(1, n, seed=12)).public()
        sums.append(negligibility_diagnostic(evaluate_moments(data, theta)))
    ratio = sums[1] / sums[0]
    assert np.all((ratio >= 0.3) & (ratio <= 0.7))


def test_negligibility_invariant_to_relabeling(small_game):
    theta = ThetaParams(1.0, 0.5)
    perm = np.concatenate([np.random.default_rng(0).permutation(np.flatnonzero(small_game.group_of == s))
                           for s in range(small_game.num_groups)])
    shuffled = make_data(small_game.actions[perm], small_game.covariates[perm], small_game.group_of[perm])
    a = negligibility_diagnostic(evaluate_moments(small_game, theta))
    b = negligibility_diagnostic(evaluate_moments(shuffled, theta))
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_negligibility_warning_threshold():
    with pytest.warns(NegligibilityWarning):
        check_negligibility(np.array([0.01, 0.2]))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_negligibility(np.array([0.01, 0.02]))


def test_result_csv(tmp_path, small_game):
    res = confidence_set(small_game, [ThetaParams(1.0, 0.5)], config=BootstrapConfig(B=30))
    path = tmp_path / "cs.csv"
    res.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "beta,phi,T,crit,accept,tau_theta"
    assert len(lines) == 2
    assert res.to_dict()["rows"][0]["accept"] in (0, 1)


def test_accepts_matches_confidence_set(small_game):
    cfg = BootstrapConfig(B=60, seed=9)
    theta = ThetaParams(1.0, 0.5)
    ok, t, crit, _ = accepts(small_game, theta, cfg)
    res = confidence_set(small_game, [theta], config=cfg)
    assert (ok, t, crit) == (bool(res.accept[0]), res.T[0], res.crit[0])
