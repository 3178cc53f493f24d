import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from netlearn.dynamics import check_imitation, run_exact_forward, run_monte_carlo
from netlearn.errors import ResourceError
from netlearn.network import make_topology
from netlearn.signals import make_symmetric_binary
from netlearn.theory import single_agent_exact_mistakes


def test_autarky_monte_carlo_t3():
    m = make_symmetric_binary(0.9)
    r = run_monte_carlo(m, make_topology("autarky", 1), 3, 1_000_000, seed=3, sample_paths=0)
    p, se = r.curve.p_hat()[0, 2], r.curve.se()[0, 2]
    assert abs(se - 0.000165) < 2e-5
    assert abs(p - 0.028) <= 3 * se
    assert r.report.ok and r.report.checked == 1_000_000


def test_uninformative_monte_carlo():
    m = make_symmetric_binary(0.5)
    r = run_monte_carlo(m, make_topology("complete", 3), 6, 40_000, seed=2, sample_paths=0)
    p, se = r.curve.p_hat(), r.curve.se()
    assert np.all(np.abs(p - 0.5) <= 4 * se)


def test_exact_forward_autarky_matches_analytic():
    m = make_symmetric_binary(0.9)
    c = run_exact_forward(m, make_topology("autarky", 1), 10)
    assert_allclose(c.p_hat(), single_agent_exact_mistakes(m, 10).p_hat(), rtol=1e-12)


@pytest.mark.parametrize("engine", ["factorized", "generic"])
def test_exact_forward_engines_agree(engine):
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 2)
    c = run_exact_forward(m, net, 5, engine=engine)
    assert_allclose(c.p_hat()[:, 0], 0.1, rtol=1e-12)
    ref = run_exact_forward(m, net, 5, engine="generic")
    assert_allclose(c.p_hat(), ref.p_hat(), rtol=1e-10)


def test_exact_forward_matches_monte_carlo():
    m = make_symmetric_binary(0.9)
    net = make_topology("complete", 2)
    exact = run_exact_forward(m, net, 5).p_hat()
    r = run_monte_carlo(m, net, 5, 2_000_000, seed=8, sample_paths=0)
    assert np.all(np.abs(r.curve.p_hat() - exact) <= 4 * r.curve.se())


def test_exact_forward_budget():
    with pytest.raises(ResourceError):
        run_exact_forward(make_symmetric_binary(0.9), make_topology("complete", 3), 12, engine="generic",
                          budget=10_000)


def test_determinism_across_workers():
    m = make_symmetric_binary(0.75)
    net = make_topology("complete", 3)
    a = run_monte_carlo(m, net, 8, 30_000, seed=4, workers=1, chunk_size=4_000)
    b = run_monte_carlo(m, net, 8, 30_000, seed=4, workers=3, chunk_size=4_000)
    np.testing.assert_array_equal(a.curve.mistakes, b.curve.mistakes)
    np.testing.assert_array_equal(a.curve.chunk_mistakes, b.curve.chunk_mistakes)
    for k in a.social_paths:
        np.testing.assert_array_equal(a.social_paths[k], b.social_paths[k])


def test_different_seed_differs():
    m = make_symmetric_binary(0.75)
    net = make_topology("complete", 2)
    a = run_monte_carlo(m, net, 5, 10_000, seed=1, sample_paths=0)
    b = run_monte_carlo(m, net, 5, 10_000, seed=2, sample_paths=0)
    assert not np.array_equal(a.curve.mistakes, b.curve.mistakes)


@pytest.mark.parametrize("kind,n,T", [("ring", 3, 5), ("star", 5, 12), ("complete", 4, 20)])
def test_invariants_hold(kind, n, T):
    r = run_monte_carlo(make_symmetric_binary(0.7), make_topology(kind, n), T, 5_000, seed=6, sample_paths=0)
    assert r.report.ok
    assert r.report.max_P_over_Mt <= 1.0
    assert r.report.max_decomposition_error <= 1e-9


@pytest.mark.parametrize("kind,n,T", [("complete", 2, 5), ("star", 3, 5), ("autarky", 2, 8)])
def test_imitation_exact(kind, n, T):
    net = make_topology(kind, n)
    rep = check_imitation(run_exact_forward(make_symmetric_binary(0.9), net, T), net, 0.0)
    assert rep.ok and rep.checked > 0


def test_imitation_detects_violation():
    # a curve that gets worse over time breaks the self-edge bound
    m = make_symmetric_binary(0.9)
    net = make_topology("autarky", 1)
    c = run_exact_forward(m, net, 4)
    c.log_p = c.log_p[:, :, ::-1].copy()
    assert not check_imitation(c, net, 0.0).ok
    assert check_imitation(c, net, 0.95).ok


def test_imitation_monte_carlo_slack():
    net = make_topology("complete", 2)
    r = run_monte_carlo(make_symmetric_binary(0.9), net, 6, 50_000, seed=9, sample_paths=0)
    rep = check_imitation(r.curve, net, 0.0)
    assert rep.ok and rep.mode == "monte_carlo"


def test_social_paths_shape():
    r = run_monte_carlo(make_symmetric_binary(0.9), make_topology("complete", 2), 6, 2_000, seed=1, sample_paths=3)
    for state, arr in r.social_paths.items():
        assert arr.shape == (3, 2, 6)
        assert np.all(np.isfinite(arr))


def test_chunk_totals_consistent():
    r = run_monte_carlo(make_symmetric_binary(0.8), make_topology("star", 4), 6, 25_000, seed=5,
                        chunk_size=7_000, sample_paths=0)
    c = r.curve
    assert c.chunk_mistakes.shape[0] == math.ceil(25_000 / 7_000)
    np.testing.assert_array_equal(c.chunk_mistakes.sum(axis=0), c.mistakes)
    assert int(c.trials.sum()) == 25_000
