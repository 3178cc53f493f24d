import itertools
import math

import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from netlearn.dynamics import run_exact_forward
from netlearn.errors import ConfigError
from netlearn.inference import GenericEngine, make_engine, resolve_engine
from netlearn.network import Network, is_strongly_connected, make_topology, sink_components, strongly_connected_components
from netlearn.signals import compute_M, llr, make_symmetric_binary, make_table
from netlearn.theory import autarky_rate, crossover_n

probs = st.floats(0.5, 0.999, allow_nan=False)
SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def networks(draw, max_n=6):
    n = draw(st.integers(1, max_n))
    nbs = [sorted({i} | set(draw(st.lists(st.integers(0, n - 1), max_size=n)))) for i in range(n)]
    return make_topology("custom", n, neighbors=nbs)


@st.composite
def tables(draw, max_size=4):
    k = draw(st.integers(2, max_size))
    g = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    b = np.array(draw(st.lists(st.floats(0.05, 1.0), min_size=k, max_size=k)))
    return make_table(list(range(k)), g / g.sum(), b / b.sum())


def reach(net):
    # transitive closure by repeated squaring of the observation relation
    R = np.zeros((net.n, net.n), dtype=bool)
    for i, j in net.edges():
        R[i, j] = True
    for _ in range(net.n):
        R = R | ((R.astype(int) @ R.astype(int)) > 0)
    return R


@SETTINGS
@given(p=probs, q=probs)
def test_M_monotone_in_p(p, q):
    lo, hi = sorted((p, q))
    assert compute_M(make_symmetric_binary(lo)) <= compute_M(make_symmetric_binary(hi)) + 1e-12


@SETTINGS
@given(p=probs)
def test_llr_antisymmetry(p):
    m = make_symmetric_binary(p)
    assert abs(llr(m, 0, 1, "g") + llr(m, 0, 1, "b")) < 1e-12


@SETTINGS
@given(m=tables())
def test_M_dominates_llrs_and_rate(m):
    M = compute_M(m)
    assert all(M >= 2 * abs(x) - 1e-12 for x in m.default.llrs())
    r = autarky_rate(m)
    assert 0.0 <= r <= M / 2 + 1e-12


@SETTINGS
@given(p=st.floats(0.51, 0.999))
def test_crossover_definition(p):
    m = make_symmetric_binary(p)
    n = crossover_n(m)
    r, M = autarky_rate(m), compute_M(m)
    assert n * r > M >= (n - 1) * r


@SETTINGS
@given(net=networks())
def test_scc_matches_closure(net):
    R = reach(net)
    mutual = R & R.T
    expected = {frozenset(np.flatnonzero(mutual[i]).tolist()) for i in range(net.n)}
    comps = strongly_connected_components(net)
    assert set(comps) == expected
    assert sum(len(c) for c in comps) == net.n


@SETTINGS
@given(net=networks())
def test_sink_properties(net):
    sinks = sink_components(net)
    assert is_strongly_connected(net) == (sinks == [frozenset(range(net.n))])
    for a, b in itertools.combinations(sinks, 2):
        assert not a & b
    R = reach(net)
    members = set().union(*sinks)
    for i in range(net.n):
        assert any(R[i, j] for j in members)  # every agent reaches a sink
    for c in sinks:
        assert all(j in c for i in c for j in net.neighbors[i])


@SETTINGS
@given(net=networks(max_n=4), p=probs, ternary=st.booleans(), choice=st.sampled_from(["auto", "generic", "factorized", "star"]))
def test_resolved_engine_is_applicable(net, p, ternary, choice):
    m = make_table([0, 1, 2], [0.2, 0.3, 0.5], [0.5, 0.3, 0.2]) if ternary else make_symmetric_binary(p)
    try:
        name = resolve_engine(choice, m, net)
    except ConfigError:
        assert choice != "auto" and choice != "generic"
        return
    if choice != "auto":
        assert name == choice
    try:
        make_engine(name, m, net, 2)
    except ConfigError as exc:  # pragma: no cover - would be a selection bug
        raise AssertionError(f"{name} chosen but inapplicable: {exc}")


@settings(max_examples=25, deadline=None)
@given(net=networks(max_n=3), p=st.floats(0.55, 0.95), T=st.integers(1, 3), seed=st.integers(0, 2**32 - 1))
def test_generic_decomposition_and_private_bound(net, p, T, seed):
    m = make_symmetric_binary(p)
    M = compute_M(m)
    sig = (np.random.default_rng(seed).random((32, net.n, T)) < p).astype(np.int8)
    b = GenericEngine(m, net, T).run(sig)
    assert np.all(np.abs(b.L - b.S - b.P) <= 1e-9)
    assert np.all(np.abs(b.P) <= M * np.arange(1, T + 1) + 1e-9)
    assert np.all(b.actions == (b.L >= -1e-9))


@settings(max_examples=15, deadline=None)
@given(net=networks(max_n=3), p=st.floats(0.55, 0.95), T=st.integers(2, 3))
def test_exact_imitation_on_random_networks(net, p, T):
    from netlearn.dynamics import check_imitation
    curve = run_exact_forward(make_symmetric_binary(p), net, T, engine="generic")
    assert check_imitation(curve, net, 0.0).ok
    assert np.all(curve.p_hat() <= 0.5 + 1e-12)
