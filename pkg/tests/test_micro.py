import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from netlearn.dynamics import run_exact_forward
from netlearn.errors import ConfigError
from netlearn.micro import (MicroGame, StrategyTable, best_deviation, check_deviation_bound,
                            check_lemma1_threshold, expected_utility, is_equilibrium, myopic_profile)
from netlearn.network import make_topology
from netlearn.signals import make_symmetric_binary


def game(n=2, T=2, p=0.9, delta=0.0, kind="complete"):
    return MicroGame(make_symmetric_binary(p), make_topology(kind, n), T, delta)


def test_single_agent_one_period_utilities():
    g = game(n=1, T=1)
    truthful = [StrategyTable(0, {((1,), ()): 1, ((0,), ()): 0})]
    const_g = [StrategyTable(0, {((1,), ()): 1, ((0,), ()): 1})]
    assert_allclose(expected_utility(g, truthful).utility[0], 0.9, rtol=1e-12)
    assert_allclose(expected_utility(g, const_g).utility[0], 0.5, rtol=1e-12)


@pytest.mark.parametrize("n,kind", [(2, "complete"), (3, "complete"), (3, "star")])
def test_utility_matches_exact_forward(n, kind):
    g = game(n=n, T=2, kind=kind)
    u = expected_utility(g, myopic_profile(g))
    acc = 1 - run_exact_forward(g.model, g.net, 2).p_hat()
    assert_allclose(u.accuracy, acc, atol=1e-12)
    assert_allclose(u.utility, acc[:, 0], atol=1e-12)  # delta = 0 weights period 1 only


def test_discounted_utility_weights():
    g = game(delta=0.4)
    u = expected_utility(g, myopic_profile(g))
    assert_allclose(u.utility, 0.6 * u.accuracy[:, 0] + 0.24 * u.accuracy[:, 1], rtol=1e-12)


def test_myopic_no_gain_at_delta0():
    g = game()
    for i in range(2):
        assert best_deviation(g, myopic_profile(g), i).gain <= 1e-12


@pytest.mark.parametrize("delta", [0.0, 0.5, 0.9])
def test_lone_agent_cannot_gain(delta):
    g = game(n=1, T=2, delta=delta)
    for mode in ("exhaustive", "backward"):
        assert best_deviation(g, myopic_profile(g), 0, mode).gain <= 1e-12


def test_anti_myopic_deviation_has_gain():
    g = game(n=1, T=1)
    anti = [StrategyTable(0, {((1,), ()): 0, ((0,), ()): 1})]
    d = best_deviation(g, anti, 0)
    assert_allclose(d.gain, 0.8, rtol=1e-12)
    ok, _ = is_equilibrium(g, anti)
    assert not ok


@pytest.mark.parametrize("delta", [0.3, 0.6])
def test_exhaustive_and_backward_agree(delta):
    g = game(delta=delta, p=0.75)
    prof = myopic_profile(g)
    for i in range(2):
        a = best_deviation(g, prof, i, "exhaustive")
        b = best_deviation(g, prof, i, "backward")
        assert_allclose(a.utility, b.utility, atol=1e-12)
        assert best_deviation(g, prof, i, "one-shot").utility <= a.utility + 1e-12


def test_threshold_delta0_all_pass():
    g = game()
    rep = check_lemma1_threshold(g, myopic_profile(g))
    assert rep.certified and rep.threshold == 0.0
    assert not rep.violations
    assert set(rep.counts()) <= {"pass", "tie"}


def test_threshold_delta03_covers_first_period():
    g = game(delta=0.3)
    rep = check_lemma1_threshold(g, myopic_profile(g))
    assert abs(rep.threshold - 0.3567) < 1e-4
    first = [e for e in rep.entries if e["t"] == 1]
    assert first and all(e["status"] == "pass" for e in first)
    assert all(abs(abs(e["L"]) - math.log(9)) < 1e-12 for e in first)


def test_threshold_below_threshold_marked():
    g = game(n=1, delta=0.9)
    rep = check_lemma1_threshold(g, myopic_profile(g))
    first = [e for e in rep.entries if e["t"] == 1]
    assert all(e["status"] == "below threshold" for e in first)


def test_threshold_flags_non_myopic_play():
    g = game(n=1, T=1)
    anti = [StrategyTable(0, {((1,), ()): 0, ((0,), ()): 1})]
    rep = check_lemma1_threshold(g, anti, certified=False)
    assert len(rep.violations) == 2 and not rep.certified


def test_deviation_bound_myopic():
    for delta in (0.0, 0.3):
        g = game(n=3, delta=delta)
        assert check_deviation_bound(g, myopic_profile(g)).ok


def test_three_period_backward():
    g = game(n=2, T=3, delta=0.3)
    prof = myopic_profile(g)
    d = best_deviation(g, prof, 0, "backward")
    assert d.gain >= -1e-12
    assert np.isfinite(d.utility)


def test_game_limits():
    with pytest.raises(ConfigError):
        game(n=4)
    with pytest.raises(ConfigError):
        game(T=4)
    with pytest.raises(ConfigError):
        game(delta=1.0)
    g = game()
    with pytest.raises(ConfigError):
        best_deviation(g, myopic_profile(g), 0, "random")
