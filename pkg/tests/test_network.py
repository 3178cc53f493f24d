import pytest

from netlearn.errors import ConfigError
from netlearn.network import is_strongly_connected, make_topology, sink_components, strongly_connected_components


def test_star_neighbors():
    net = make_topology("star", 3)
    assert net.neighbors == ((0, 1, 2), (1,), (2,))
    assert net.star_center() == 0


def test_complete_and_autarky():
    assert make_topology("complete", 2).neighbors == ((0, 1), (0, 1))
    assert make_topology("autarky", 5).neighbors == tuple((i,) for i in range(5))


def test_ring():
    net = make_topology("ring", 4)
    assert net.neighbors[0] == (0, 3) and net.neighbors[2] == (1, 2)


@pytest.mark.parametrize("kind,n,expected", [("complete", 4, True), ("star", 3, False), ("ring", 5, True),
                                             ("autarky", 1, True), ("autarky", 2, False)])
def test_strong_connectivity(kind, n, expected):
    assert is_strongly_connected(make_topology(kind, n)) is expected


def test_sink_components():
    assert sink_components(make_topology("star", 3)) == [frozenset({1}), frozenset({2})]
    assert sink_components(make_topology("complete", 4)) == [frozenset(range(4))]
    net = make_topology("custom", 3, edges=[(0, 1), (0, 0), (1, 1), (2, 2)])
    assert sink_components(net) == [frozenset({1}), frozenset({2})]


def test_custom_adds_self_loops():
    net = make_topology("custom", 2, edges=[(0, 1)])
    assert net.neighbors == ((0, 1), (1,))


@pytest.mark.parametrize("edges", [[(0, 5)], [(0,)], [("a", 1)], [(1, -1)]])
def test_malformed_edges(edges):
    with pytest.raises(ConfigError):
        make_topology("custom", 2, edges=edges)


def test_custom_requires_edges():
    with pytest.raises(ConfigError):
        make_topology("custom", 2)
    with pytest.raises(ConfigError):
        make_topology("torus", 2)


def test_deep_chain_no_recursion_error():
    n = 5000
    net = make_topology("custom", n, edges=[(i, i + 1) for i in range(n - 1)])
    comps = strongly_connected_components(net)
    assert len(comps) == n
    assert sink_components(net) == [frozenset({n - 1})]
