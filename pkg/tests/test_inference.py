import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from netlearn.errors import ConfigError, ResourceError, UnreachableInformationSet
from netlearn.inference import (BeliefState, CompleteEngine, GenericEngine, StarEngine, beliefs_generic,
                                build_action_maps_generic, make_engine, myopic_action, resolve_engine)
from netlearn.network import make_topology
from netlearn.signals import make_symmetric_binary, make_table
from netlearn.verify import all_signal_matrices, compare_engines

LN9 = math.log(9)


@pytest.mark.parametrize("p,a", [(0.7, 1), (0.5, 1), (0.2, 0)])
def test_myopic_action(p, a):
    L = math.log(p / (1 - p))
    assert myopic_action(BeliefState(L, 0.0, L)) == a
    assert myopic_action(L) == a


def test_first_action_reveals_signal():
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 2)
    b = beliefs_generic(m, net, 1, all_signal_matrices(2, 1))
    np.testing.assert_array_equal(b.actions[:, :, 0], all_signal_matrices(2, 1)[:, :, 0])
    assert_allclose(b.S[:, :, 0], 0.0, atol=1e-12)


def test_generic_hand_computed_t2():
    # agent 0: s = (g, b); agent 1 played g at t=1
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 2)
    sig = np.array([[[1, 0], [1, 1]]], dtype=np.int8)
    b = beliefs_generic(m, net, 2, sig)
    assert_allclose(b.L[0, 0, 1], LN9, atol=1e-12)
    assert b.actions[0, 0, 1] == 1


def test_social_likelihood_both_g():
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 2)
    sig = np.array([[[1, 1], [1, 0]]], dtype=np.int8)
    b = beliefs_generic(m, net, 2, sig)
    assert_allclose(b.S[0, :, 1], math.log(81), atol=1e-12)


def test_autarky_generic_count_rule():
    m = make_symmetric_binary(0.7)
    net = make_topology("autarky", 1)
    sig = all_signal_matrices(1, 5)
    b = beliefs_generic(m, net, 5, sig)
    counts = np.cumsum(sig[:, 0, :], axis=1)
    t = np.arange(1, 6)
    np.testing.assert_array_equal(b.actions[:, 0, :], (2 * counts >= t).astype(b.actions.dtype))


def test_autarky_decomposition():
    # S is the outside observer's view of the agent's own past actions
    m = make_symmetric_binary(0.9)
    net = make_topology("autarky", 1)
    b = beliefs_generic(m, net, 4, np.ones((1, 1, 4), dtype=np.int8))
    assert_allclose(b.L[0, 0], LN9 * np.arange(1, 5), atol=1e-12)
    # a_1 = g reveals s_1; a_3 = g also needs one g among s_2, s_3
    s4 = math.log(0.9 * (1 - 0.1 ** 2) / (0.1 * (1 - 0.9 ** 2)))
    assert_allclose(b.S[0, 0], [0.0, LN9, LN9, s4], atol=1e-12)
    assert np.all(np.abs(b.P[0, 0]) <= 2 * LN9 * np.arange(1, 5))


def test_action_maps_cover_all_periods():
    maps = build_action_maps_generic(make_symmetric_binary(0.9), make_topology("complete", 2), 3)
    assert set(maps) == {(i, t) for i in range(2) for t in (1, 2, 3)}
    assert len(maps[(0, 1)]) == 2


def test_unreachable_information_set():
    eng = GenericEngine(make_symmetric_binary(0.9), make_topology("complete", 2), 2)
    with pytest.raises(UnreachableInformationSet):
        # own signal g at t=1 yet own first action b: impossible under myopic play
        eng.posterior(0, 2, ((1, 1), ((0, 1),)))


def test_generic_budget():
    with pytest.raises(ResourceError):
        GenericEngine(make_symmetric_binary(0.9), make_topology("complete", 3), 10, budget=1000)


@pytest.mark.parametrize("n,p,T", [(2, 0.9, 5), (3, 0.75, 4), (1, 0.8, 6)])
def test_complete_matches_generic(n, p, T):
    m = make_symmetric_binary(p)
    net = make_topology("complete", n)
    same, diff = compare_engines(CompleteEngine(m, net, T), GenericEngine(m, net, T), all_signal_matrices(n, T))
    assert same and diff <= 1e-9


def test_star_matches_generic():
    m = make_symmetric_binary(0.9)
    net = make_topology("star", 3)
    same, diff = compare_engines(StarEngine(m, net, 5), GenericEngine(m, net, 5), all_signal_matrices(3, 5))
    assert same and diff <= 1e-9


def test_star_center_t2():
    m = make_symmetric_binary(0.9)
    net = make_topology("star", 3)
    sig = np.array([[[1, 0], [1, 0], [1, 0]]], dtype=np.int8)
    b = StarEngine(m, net, 2).run(sig)
    assert_allclose(b.L[0, 0, 1], 3 * LN9 - LN9, atol=1e-12)  # plus own second signal b
    # peripherals: S is the log-odds of their own first action, P the rest of the count
    assert_allclose(b.S[0, 1:, 0], 0.0, atol=1e-12)
    assert_allclose(b.S[0, 1:, 1], LN9, atol=1e-12)
    assert_allclose(b.P[0, 1:, 1], -LN9, atol=1e-12)


def test_engine_applicability():
    m = make_symmetric_binary(0.9)
    with pytest.raises(ConfigError):
        CompleteEngine(m, make_topology("star", 3), 3)
    with pytest.raises(ConfigError):
        StarEngine(m, make_topology("complete", 3), 3)
    with pytest.raises(ConfigError):
        resolve_engine("factorized", m, make_topology("ring", 3))
    assert resolve_engine("auto", m, make_topology("ring", 3)) == "generic"
    assert resolve_engine("auto", m, make_topology("star", 4)) == "star"
    assert resolve_engine("auto", m, make_topology("complete", 4)) == "factorized"


def test_auto_with_ternary_signals_is_generic():
    m = make_table([0, 1, 2], [0.2, 0.3, 0.5], [0.5, 0.3, 0.2])
    net = make_topology("complete", 2)
    assert resolve_engine("auto", m, net) == "generic"
    eng = make_engine("auto", m, net, 3)
    assert isinstance(eng, GenericEngine)


def test_factorized_long_horizon_runs():
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 3)
    rng = np.random.default_rng(0)
    sig = (rng.random((200, 3, 40)) < 0.9).astype(np.int8)
    b = make_engine("auto", m, net, 40).run(sig)
    assert b.L.shape == (200, 3, 40)
    assert_allclose(b.L, b.S + b.P, atol=1e-9)
    assert np.all(np.abs(b.P) <= 2 * LN9 * np.arange(1, 41) + 1e-9)


def test_generic_memory_guard():
    with pytest.raises(ResourceError, match="GiB"):
        GenericEngine(make_symmetric_binary(0.75), make_topology("ring", 3), 8)
    with pytest.raises(ResourceError):
        GenericEngine(make_symmetric_binary(0.75), make_topology("ring", 3), 5, memory_limit=1000)
