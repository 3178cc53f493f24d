"""Directed observation networks.

Edge convention: an edge ``i -> j`` means *i observes j*, i.e. ``j in
neighbors[i]``.  Agents are numbered ``0..n-1`` and every agent observes
itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ConfigError

log = logging.getLogger(__name__)

TOPOLOGIES = ("complete", "star", "ring", "autarky", "custom")


@dataclass(frozen=True)
class Network:
    n: int
    neighbors: tuple[tuple[int, ...], ...]
    kind: str = "custom"

    def __post_init__(self):
        if self.n < 1 or len(self.neighbors) != self.n:
            raise ConfigError("network must have n >= 1 and one neighbor list per agent")
        for i, nb in enumerate(self.neighbors):
            if i not in nb:
                raise ConfigError(f"agent {i} does not observe itself")
            if list(nb) != sorted(set(nb)) or nb[0] < 0 or nb[-1] >= self.n:
                raise ConfigError(f"neighbor list of agent {i} is not sorted, unique and in range")

    def observes(self, i: int, j: int) -> bool:
        return j in self.neighbors[i]

    def edges(self) -> list[tuple[int, int]]:
        """All (observer, observed) pairs, self-loops included."""
        return [(i, j) for i, nb in enumerate(self.neighbors) for j in nb]

    def is_complete(self) -> bool:
        return all(len(nb) == self.n for nb in self.neighbors)

    def star_center(self) -> int | None:
        """The center if this is a star (one agent sees all, others see only themselves)."""
        if self.n == 1:
            return 0
        centers = [i for i, nb in enumerate(self.neighbors) if len(nb) == self.n]
        if len(centers) != 1:
            return None
        c = centers[0]
        if all(nb == (i,) for i, nb in enumerate(self.neighbors) if i != c):
            return c
        return None

    def is_closed_under_observation(self) -> bool:
        """True when every observed neighbor's neighborhood is contained in the observer's."""
        sets = [set(nb) for nb in self.neighbors]
        return all(sets[j] <= sets[i] for i in range(self.n) for j in sets[i])

    def to_dict(self) -> dict:
        if self.kind in ("complete", "star", "ring", "autarky"):
            return {"kind": self.kind, "n": self.n}
        return {"kind": "custom", "n": self.n, "neighbors": [list(nb) for nb in self.neighbors]}


def _build(n: int, lists: Iterable[Iterable[int]], kind: str) -> Network:
    return Network(n, tuple(tuple(sorted(set(nb))) for nb in lists), kind)


def make_topology(
    kind: str,
    n: int,
    edges: Sequence | None = None,
    neighbors: Sequence[Sequence[int]] | None = None,
) -> Network:
    """Standard topologies.

    ``star`` puts agent 0 at the center.  ``ring`` has each agent observe its
    predecessor ``(i - 1) mod n``.  ``custom`` takes either ``edges``, a list
    of ``(observer, observed)`` pairs, or ``neighbors``, one list per agent;
    missing self-loops are added with a warning.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if kind == "complete":
        return _build(n, [range(n)] * n, kind)
    if kind == "star":
        return _build(n, [range(n)] + [[i] for i in range(1, n)], kind)
    if kind == "ring":
        return _build(n, [[i, (i - 1) % n] for i in range(n)], kind)
    if kind == "autarky":
        return _build(n, [[i] for i in range(n)], kind)
    if kind != "custom":
        raise ConfigError(f"unknown topology {kind!r}; expected one of {TOPOLOGIES}")
    if edges is None and neighbors is None:
        raise ConfigError("custom topology requires an edge list")
    lists: list[set[int]] = [set() for _ in range(n)]
    if neighbors is not None:
        if len(neighbors) != n:
            raise ConfigError(f"expected {n} neighbor lists, got {len(neighbors)}")
        for i, nb in enumerate(neighbors):
            lists[i].update(_agent(x, n) for x in nb)
    if edges is not None:
        for e in edges:
            try:
                i, j = e
            except (TypeError, ValueError):
                raise ConfigError(f"malformed edge {e!r}") from None
            lists[_agent(i, n)].add(_agent(j, n))
    missing = [i for i in range(n) if i not in lists[i]]
    if missing:
        log.warning("adding missing self-loops for agents %s", missing)
        for i in missing:
            lists[i].add(i)
    return _build(n, lists, "custom")


def _agent(x, n: int) -> int:
    if not isinstance(x, int) or isinstance(x, bool) or not 0 <= x < n:
        raise ConfigError(f"agent id {x!r} out of range 0..{n - 1}")
    return x


def strongly_connected_components(net: Network) -> list[frozenset[int]]:
    """Tarjan's algorithm, iterative so deep graphs do not hit the recursion limit."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    comps: list[frozenset[int]] = []
    counter = 0
    for root in range(net.n):
        if root in index:
            continue
        work = [(root, iter(net.neighbors[root]))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(net.neighbors[w])))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = set()
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.add(w)
                    if w == v:
                        break
                comps.append(frozenset(comp))
    return comps


def is_strongly_connected(net: Network) -> bool:
    return len(strongly_connected_components(net)) == 1


def sink_components(net: Network) -> list[frozenset[int]]:
    """Strongly connected components whose members observe no one outside them.

    Sorted by smallest member.
    """
    sinks = [
        c for c in strongly_connected_components(net)
        if all(j in c for i in c for j in net.neighbors[i])
    ]
    return sorted(sinks, key=min)
