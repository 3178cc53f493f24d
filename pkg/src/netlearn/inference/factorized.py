"""Exact myopic dynamics on observation-closed networks.

A network is *closed* when every agent sees everything its neighbors see
(``N_j ⊆ N_i`` for all ``j in N_i``); complete networks, stars and autarky
qualify.  There, agent j's actions depend only on j's own signals and on
actions that every observer of j also sees, so the probability of an
observed history factorizes over the observed agents:

    P[H^i_t | theta] = prod_{j in N_i} mu_theta(C_j),

where C_j is the set of j's own signal prefixes consistent with j's actions.
With i.i.d. binary signals each C_j is summarized exactly by integer path
counts ``N[k]`` = number of consistent prefixes with k g-leaning signals.
Filters are interned by value, so agents and trials in the same filter state
share one node.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp

from ..curves import MistakeCurve
from ..errors import ConfigError, InvariantViolation, ResourceError
from ..network import Network
from ..signals import B, G, SignalModel, binary_llrs
from .core import TIE_ACTION, Beliefs, count_threshold

MAX_T = 60  # path counts stay below 2**63
DEFAULT_NODE_BUDGET = 2 ** 22
JOINT_MAX_AGENTS = 6
MASS_TOL = 1e-10  # log total probability per state


class FilterStore:
    """Interned consistency filters and their transitions."""

    def __init__(self, q_g: float, q_b: float, T: int):
        self.T = T
        self.lq = {G: (math.log(q_g), math.log1p(-q_g)), B: (math.log(q_b), math.log1p(-q_b))}
        self.width = 2 * (T + 2)
        self.counts: list[np.ndarray] = []
        self.length: list[int] = []
        self._index: dict[tuple[int, bytes], int] = {}
        self._cap = 1024
        self.R = np.zeros(self._cap)
        self.logmass = np.zeros((2, self._cap))
        self.children = np.full((self._cap, self.width), -1, dtype=np.int64)
        self.root = self.intern(0, np.ones(1, dtype=np.int64))

    def __len__(self):
        return len(self.counts)

    def intern(self, tau: int, counts: np.ndarray) -> int:
        key = (tau, counts.tobytes())
        node = self._index.get(key)
        if node is not None:
            return node
        node = len(self.counts)
        if node >= self._cap:
            self._grow()
        self._index[key] = node
        self.counts.append(counts)
        self.length.append(tau)
        k = np.nonzero(counts)[0]
        logn = np.log(counts[k].astype(float))
        for th in (B, G):
            l1, l0 = self.lq[th]
            self.logmass[th, node] = logsumexp(logn + k * l1 + (tau - k) * l0)
        self.R[node] = self.logmass[G, node] - self.logmass[B, node]
        return node

    def _grow(self):
        self._cap *= 2
        self.R = np.resize(self.R, self._cap)
        lm = np.zeros((2, self._cap))
        lm[:, : self.logmass.shape[1]] = self.logmass
        self.logmass = lm
        ch = np.full((self._cap, self.width), -1, dtype=np.int64)
        ch[: self.children.shape[0]] = self.children
        self.children = ch

    def make_child(self, node: int, thr: int, action: int) -> int:
        """Filter after one more signal, restricted to counts playing ``action``."""
        c = self.counts[node]
        ext = np.zeros(len(c) + 1, dtype=np.int64)
        ext[:-1] += c
        ext[1:] += c
        if action == G:
            ext[: min(thr, len(ext))] = 0
        else:
            ext[thr:] = 0
        if not ext.any():
            return -1
        child = self.intern(self.length[node] + 1, ext)
        self.children[node, 2 * thr + action] = child
        return child

    def step(self, nodes: np.ndarray, thr: np.ndarray, actions: np.ndarray) -> np.ndarray:
        """Vectorized child lookup, creating nodes as needed."""
        code = 2 * thr.astype(np.int64) + actions
        out = self.children[nodes, code]
        missing = out < 0
        if missing.any():
            pairs = np.unique(np.stack([nodes[missing], code[missing]], axis=1), axis=0)
            for node, c in pairs.tolist():
                if self.make_child(node, c // 2, c % 2) < 0:
                    raise ConfigError("realized action inconsistent with its own filter")
            out = self.children[nodes, code]
        return out


class JointStore:
    """Interned joint filter states (one filter node per agent) for small networks.

    Each joint state caches the per-agent thresholds, social offsets and
    filter log-ratios needed to advance a trial by one period.
    """

    def __init__(self, engine: "FactorizedEngine"):
        self.eng = engine
        self.n = engine.n
        self.members: list[tuple[int, ...]] = []
        self._index: dict[tuple[int, ...], int] = {}
        self._cap = 256
        self.thr = np.zeros((self._cap, self.n), dtype=np.int64)
        self.offset = np.zeros((self._cap, self.n))
        self.R = np.zeros((self._cap, self.n))
        self.children = np.full((self._cap, 2 ** self.n), -1, dtype=np.int32)
        self.pow2 = (1 << np.arange(self.n)).astype(np.int64)
        self.root = self.intern((engine.store.root,) * self.n)

    def __len__(self):
        return len(self.members)

    def intern(self, members: tuple[int, ...]) -> int:
        jid = self._index.get(members)
        if jid is not None:
            return jid
        jid = len(self.members)
        if jid >= self._cap:
            self._cap *= 2
            self.thr = _resize_rows(self.thr, self._cap, 0)
            self.offset = _resize_rows(self.offset, self._cap, 0.0)
            self.R = _resize_rows(self.R, self._cap, 0.0)
            self.children = _resize_rows(self.children, self._cap, -1)
        self._index[members] = jid
        self.members.append(members)
        st = self.eng.store
        nodes = np.array(members)
        t = st.length[members[0]] + 1
        R = st.R[nodes]
        off = R @ self.eng._others_T
        self.R[jid] = R
        self.offset[jid] = off
        if t <= self.eng.T:
            self.thr[jid] = count_threshold(self.eng._llr[t], off, self.eng.tie_action)
        return jid

    def step(self, jids: np.ndarray, actions: np.ndarray) -> np.ndarray:
        prof = actions.astype(np.int64) @ self.pow2
        out = self.children[jids, prof]
        missing = out < 0
        if missing.any():
            st = self.eng.store
            for jid, pr in np.unique(np.stack([jids[missing], prof[missing]], axis=1), axis=0).tolist():
                kids = []
                for i, node in enumerate(self.members[jid]):
                    a = (pr >> i) & 1
                    thr = int(self.thr[jid, i])
                    child = st.children[node, 2 * thr + a]
                    if child < 0:
                        child = st.make_child(node, thr, a)
                    if child < 0:
                        raise ConfigError("realized action inconsistent with its own filter")
                    kids.append(int(child))
                self.children[jid, pr] = self.intern(tuple(kids))
            out = self.children[jids, prof]
        return out


def _resize_rows(arr: np.ndarray, rows: int, fill) -> np.ndarray:
    out = np.full((rows,) + arr.shape[1:], fill, dtype=arr.dtype)
    out[: arr.shape[0]] = arr
    return out


class FactorizedEngine:
    """Exact beliefs for closed networks with stationary binary signals."""

    name = "factorized"

    def __init__(self, model: SignalModel, net: Network, T: int,
                 tie_action: int = TIE_ACTION, node_budget: int = DEFAULT_NODE_BUDGET):
        if not net.is_closed_under_observation():
            raise ConfigError("factorized engine needs a network where observers see all their neighbors see")
        if not 1 <= T <= MAX_T:
            raise ConfigError(f"factorized engine supports 1 <= T <= {MAX_T}")
        self.l1, self.l0 = binary_llrs(model)
        self.model, self.net, self.T, self.n = model, net, T, net.n
        self.tie_action = tie_action
        self.node_budget = node_budget
        self.store = FilterStore(model.default.pg[1], model.default.pb[1], T)
        others = np.zeros((self.n, self.n))
        for i, nb in enumerate(net.neighbors):
            for j in nb:
                if j != i:
                    others[i, j] = 1.0
        self._others_T = others.T
        self._llr = [np.arange(t + 1) * self.l1 + (t - np.arange(t + 1)) * self.l0 for t in range(T + 1)]
        self.joint = JointStore(self) if self.n <= JOINT_MAX_AGENTS else None

    def own_llr(self, counts: np.ndarray, t: int) -> np.ndarray:
        return self._llr[t][counts]

    def _check_budget(self):
        if len(self.store) > self.node_budget:
            raise ResourceError(f"filter store exceeded {self.node_budget} nodes")

    def iterate(self, signals: np.ndarray, beliefs: bool = True):
        """Yield ``(t, actions, L, S, P)`` per period for a batch of (n, T) signal matrices.

        With ``beliefs=False`` the belief arrays are ``None``.
        """
        sig = np.asarray(signals)
        if sig.ndim == 2:
            sig = sig[None]
        if sig.shape[1:] != (self.n, self.T):
            raise ConfigError(f"signal matrices must have shape ({self.n}, {self.T}), got {sig.shape[1:]}")
        if sig.size and (sig.min() < 0 or sig.max() > 1):
            raise ConfigError("binary signals must be 0 or 1")
        # period-major layout keeps each period's slice contiguous
        counts = np.cumsum(np.ascontiguousarray(np.moveaxis(sig, 2, 0)), axis=0, dtype=np.int64)
        if self.joint is not None:
            yield from self._iterate_joint(counts, beliefs)
            return
        nodes = np.full(sig.shape[:2], self.store.root, dtype=np.int64)
        for t in range(1, self.T + 1):
            k = counts[t - 1]
            R = self.store.R[nodes]
            offset = R @ self._others_T
            thr = count_threshold(self._llr[t], offset, self.tie_action)
            actions = (k >= thr).astype(np.int8)
            if beliefs:
                own = self.own_llr(k, t)
                L = own + offset
                S = offset + R
                P = own - R
                yield t, actions, L, S, P
            else:
                yield t, actions, None, None, None
            if t < self.T:
                nodes = self.store.step(nodes, thr, actions)
                self._check_budget()

    def _iterate_joint(self, counts: np.ndarray, beliefs: bool):
        js = self.joint
        jids = np.full(counts.shape[1], js.root, dtype=np.int64)
        for t in range(1, self.T + 1):
            k = counts[t - 1]
            actions = (k >= js.thr[jids]).astype(np.int8)
            if beliefs:
                own = self._llr[t][k]
                off = js.offset[jids]
                R = js.R[jids]
                yield t, actions, own + off, off + R, own - R
            else:
                yield t, actions, None, None, None
            if t < self.T:
                jids = js.step(jids, actions)
                self._check_budget()

    def run(self, signals: np.ndarray) -> Beliefs:
        sig = np.asarray(signals)
        if sig.ndim == 2:
            sig = sig[None]
        shape = (sig.shape[0], self.n, self.T)
        out = Beliefs(np.empty(shape, dtype=np.int8), np.empty(shape), np.empty(shape), np.empty(shape))
        for t, a, L, S, P in self.iterate(sig):
            out.actions[:, :, t - 1] = a
            out.L[:, :, t - 1] = L
            out.S[:, :, t - 1] = S
            out.P[:, :, t - 1] = P
        return out

    def exact_curve(self, node_budget: int | None = None) -> MistakeCurve:
        """Exact mistake curve by forward expansion over joint filter states.

        Joint states (one filter per agent) are merged when identical, so the
        expansion is exact; exceeding ``node_budget`` states in one period is
        an error, never a truncation.
        """
        budget = node_budget or self.node_budget
        st = self.store
        n = self.n
        log_p = np.full((2, n, self.T), -np.inf)
        frontier = {(st.root,) * n: np.zeros(2)}
        for t in range(1, self.T + 1):
            nxt: dict[tuple, np.ndarray] = {}
            llr_t = self._llr[t]
            for joint, lw in frontier.items():
                nodes = np.array(joint)
                offset = st.R[nodes] @ self._others_T
                thr = count_threshold(llr_t, offset, self.tie_action)
                options = []
                for i in range(n):
                    opts = []
                    for a in (B, G):
                        child = st.children[nodes[i], 2 * thr[i] + a]
                        if child < 0:
                            child = st.make_child(nodes[i], int(thr[i]), a)
                        if child < 0:
                            continue
                        cond = st.logmass[:, child] - st.logmass[:, nodes[i]]
                        opts.append((a, child, cond))
                        for th in (B, G):
                            if a != th:
                                log_p[th, i, t - 1] = np.logaddexp(log_p[th, i, t - 1], lw[th] + cond[th])
                    options.append(opts)
                if t == self.T:
                    continue
                for combo in _product(options):
                    key = tuple(c[1] for c in combo)
                    w = lw + sum(c[2] for c in combo)
                    prev = nxt.get(key)
                    nxt[key] = w if prev is None else np.logaddexp(prev, w)
            if nxt:
                mass = np.logaddexp.reduce(np.array(list(nxt.values())), axis=0)
                if np.max(np.abs(mass)) > MASS_TOL:
                    raise InvariantViolation(f"forward expansion lost probability mass at t={t + 1}: {mass}")
            if len(nxt) > budget:
                raise ResourceError(f"exact forward expansion reached {len(nxt)} joint states at t={t + 1} "
                                    f"(budget {budget})")
            frontier = nxt
        return MistakeCurve("exact_forward", n, self.T, log_p=log_p)


def _product(options):
    if not options:
        yield ()
        return
    head, *rest = options
    for tail in _product(rest):
        for h in head:
            yield (h, *tail)


def check_complete(net: Network):
    if not net.is_complete():
        raise ConfigError("the complete-network engine requires a complete network")


def check_star(net: Network):
    if net.star_center() is None:
        raise ConfigError("the star engine requires a star network")


class CompleteEngine(FactorizedEngine):
    name = "factorized"

    def __init__(self, model, net, T, **kw):
        check_complete(net)
        super().__init__(model, net, T, **kw)


class StarEngine(FactorizedEngine):
    name = "star"

    def __init__(self, model, net, T, **kw):
        check_star(net)
        super().__init__(model, net, T, **kw)
