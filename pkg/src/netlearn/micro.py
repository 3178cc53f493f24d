"""Exhaustive checks of strategic (forward-looking) play in tiny games.

Every state and signal matrix is enumerated with its exact probability, so
expected utilities, posteriors and best responses are exact.  Information
sets use the same keys as :meth:`GenericEngine.action_map`:
``(own_signals, observed)`` where ``own_signals`` covers periods 1..t and
``observed`` lists, for each earlier period, the actions of the agent's
neighbors (itself included) in order.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import MistakeCurve
from .dynamics import ImitationReport, check_imitation
from .errors import ConfigError, ResourceError
from .inference.core import TIE_ACTION, TIE_TOL, myopic_action
from .network import Network
from .signals import B, G, SignalModel, binary_llrs

MAX_AGENTS = 3
MAX_T = 3
GAIN_TOL = 1e-12
DEFAULT_STRATEGY_BUDGET = 2 ** 20
MODES = ("exhaustive", "backward", "one-shot")


@dataclass(frozen=True)
class MicroGame:
    model: SignalModel
    net: Network
    T: int
    delta: float
    budget: int = DEFAULT_STRATEGY_BUDGET

    def __post_init__(self):
        binary_llrs(self.model)
        if self.net.n > MAX_AGENTS:
            raise ConfigError(f"micro games allow at most {MAX_AGENTS} agents")
        if not 1 <= self.T <= MAX_T:
            raise ConfigError(f"micro games need 1 <= T <= {MAX_T}")
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("delta must lie in [0, 1)")

    @property
    def n(self) -> int:
        return self.net.n

    def weight(self, t: int) -> float:
        """Normalized discount weight of period t."""
        return (1.0 - self.delta) * self.delta ** (t - 1)

    @property
    def threshold(self) -> float:
        """|L| level above which equilibrium play must be myopic."""
        return -math.log1p(-self.delta)


@dataclass
class StrategyTable:
    """Pure strategy of one agent: an action per information set.

    Information sets missing from the table (never reached with positive
    probability under the profile it was built for) fall back to following
    the agent's own signal count, ties to g.
    """

    agent: int
    actions: dict = field(default_factory=dict)

    def action(self, key, llrs: tuple[float, float]) -> int:
        a = self.actions.get(key)
        if a is not None:
            return a
        l1, l0 = llrs
        own = key[0]
        k = sum(own)
        return myopic_action(k * l1 + (len(own) - k) * l0)

    def __len__(self):
        return len(self.actions)


class _Outcomes:
    """All (state, signal matrix) pairs of a game with their probabilities."""

    def __init__(self, game: MicroGame):
        n, T = game.n, game.T
        q = {G: game.model.default.pg, B: game.model.default.pb}
        self.theta, self.sig, self.w = [], [], []
        for th in (B, G):
            for bits in itertools.product((0, 1), repeat=n * T):
                s = np.array(bits, dtype=np.int8).reshape(n, T)
                self.theta.append(th)
                self.sig.append(s)
                self.w.append(0.5 * float(np.prod(q[th][s])))
        self.theta = np.array(self.theta, dtype=np.int8)
        self.w = np.array(self.w)
        self.K = len(self.w)


def _key(net: Network, i: int, t: int, sig: np.ndarray, acts: np.ndarray):
    own = tuple(int(x) for x in sig[i, :t])
    obs = tuple(tuple(int(acts[j, tau]) for j in net.neighbors[i]) for tau in range(t - 1))
    return own, obs


def _posterior(keys: list, w: np.ndarray, theta: np.ndarray) -> dict:
    """Posterior log-odds of g at each information set, uniform prior included in w."""
    mass: dict = {}
    for key, wk, th in zip(keys, w, theta):
        m = mass.setdefault(key, [0.0, 0.0])
        m[th] += wk
    return {k: (math.log(m[G]) - math.log(m[B]) if m[G] > 0 and m[B] > 0 else math.copysign(math.inf, m[G] - m[B]))
            for k, m in mass.items() if m[G] + m[B] > 0}


@dataclass
class Play:
    """Realized actions and information sets over all outcomes."""

    actions: np.ndarray  # (K, n, T)
    keys: list  # keys[t-1][i] -> list of K keys
    outcomes: _Outcomes

    def accuracy(self) -> np.ndarray:
        """P[a_t^i == Theta], shape (n, T)."""
        o = self.outcomes
        right = self.actions == o.theta[:, None, None]
        return np.einsum("k,knt->nt", o.w, right)

    def mistake_curve(self) -> MistakeCurve:
        o = self.outcomes
        n, T = self.actions.shape[1:]
        log_p = np.full((2, n, T), -np.inf)
        for th in (B, G):
            sel = o.theta == th
            wrong = self.actions[sel] != th
            p = np.einsum("k,knt->nt", o.w[sel] * 2.0, wrong)
            with np.errstate(divide="ignore"):
                log_p[th] = np.log(p)
        return MistakeCurve("exact_forward", n, T, log_p=log_p)


def play(game: MicroGame, policies, outcomes: _Outcomes | None = None) -> Play:
    """Run a profile over every outcome.

    ``policies[i](t, keys, play_so_far)`` returns agent i's actions at period
    t for all outcomes given their information-set keys.
    """
    o = outcomes or _Outcomes(game)
    acts = np.zeros((o.K, game.n, game.T), dtype=np.int8)
    keys = []
    for t in range(1, game.T + 1):
        kt = [[_key(game.net, i, t, o.sig[k], acts[k]) for k in range(o.K)] for i in range(game.n)]
        keys.append(kt)
        for i in range(game.n):
            acts[:, i, t - 1] = policies[i](t, kt[i], o)
    return Play(acts, keys, o)


def _table_policy(table: StrategyTable, llrs):
    return lambda t, keys, o: np.array([table.action(k, llrs) for k in keys], dtype=np.int8)


def _myopic_policy(tie_action: int = TIE_ACTION):
    def decide(t, keys, o):
        post = _posterior(keys, o.w, o.theta)
        return np.array([myopic_action(post[k], tie_action) for k in keys], dtype=np.int8)
    return decide


def _tables_from_play(game: MicroGame, pl: Play) -> list[StrategyTable]:
    tables = [StrategyTable(i) for i in range(game.n)]
    for t in range(1, game.T + 1):
        for i in range(game.n):
            for k, key in enumerate(pl.keys[t - 1][i]):
                if pl.outcomes.w[k] > 0:
                    tables[i].actions[key] = int(pl.actions[k, i, t - 1])
    return tables


def myopic_profile(game: MicroGame, tie_action: int = TIE_ACTION) -> list[StrategyTable]:
    """Every agent plays the sign of its exact posterior at every reachable information set."""
    pl = play(game, [_myopic_policy(tie_action)] * game.n)
    return _tables_from_play(game, pl)


@dataclass
class UtilityReport:
    utility: np.ndarray  # (n,)
    accuracy: np.ndarray  # (n, T)


def expected_utility(game: MicroGame, profile: list[StrategyTable]) -> UtilityReport:
    """Exact discounted, (1 - delta)-normalized expected utility of each agent."""
    _check_profile(game, profile)
    llrs = binary_llrs(game.model)
    pl = play(game, [_table_policy(tb, llrs) for tb in profile])
    acc = pl.accuracy()
    weights = np.array([game.weight(t) for t in range(1, game.T + 1)])
    return UtilityReport(acc @ weights, acc)


def _check_profile(game: MicroGame, profile):
    if len(profile) != game.n:
        raise ConfigError(f"profile needs {game.n} strategy tables, got {len(profile)}")


@dataclass
class Deviation:
    agent: int
    mode: str
    table: StrategyTable
    utility: float
    baseline: float
    strategies_examined: int

    @property
    def gain(self) -> float:
        return self.utility - self.baseline

    def to_dict(self) -> dict:
        return {"agent": self.agent, "mode": self.mode, "gain": self.gain, "utility": self.utility,
                "baseline": self.baseline, "strategies_examined": self.strategies_examined,
                "necessary_condition_only": self.mode == "one-shot"}


def best_deviation(game: MicroGame, profile: list[StrategyTable], deviator: int,
                   mode: str = "exhaustive") -> Deviation:
    """Best strategy of ``deviator`` against the others' fixed strategies.

    ``exhaustive`` evaluates every pure strategy on the deviator's reachable
    information sets (T <= 2).  ``backward`` solves the deviator's decision
    problem by backward induction over its information sets (exact at any
    micro horizon).  ``one-shot`` flips the action at a single on-path
    information set and continues myopically; it is a necessary condition
    only.
    """
    _check_profile(game, profile)
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    if not 0 <= deviator < game.n:
        raise ConfigError(f"deviator {deviator} out of range")
    baseline = float(expected_utility(game, profile).utility[deviator])
    if game.delta == 0.0:
        return _per_period(game, profile, deviator, mode, baseline)
    if mode == "exhaustive":
        table, best, count = _exhaustive(game, profile, deviator)
    elif mode == "backward":
        table, best, count = _backward(game, profile, deviator)
    else:
        table, best, count = _one_shot(game, profile, deviator, baseline)
    return Deviation(deviator, mode, table, best, baseline, count)


def _per_period(game: MicroGame, profile, deviator: int, mode: str, baseline: float) -> Deviation:
    llrs = binary_llrs(game.model)
    pl = play(game, [_table_policy(tb, llrs) for tb in profile])
    o = pl.outcomes
    best = StrategyTable(deviator, dict(profile[deviator].actions))
    gain = 0.0
    for t in range(1, game.T + 1):
        mass: dict = {}
        for k, key in enumerate(pl.keys[t - 1][deviator]):
            m = mass.setdefault(key, np.zeros(2))
            m[o.theta[k]] += o.w[k]
        current = float(np.sum(o.w * (pl.actions[:, deviator, t - 1] == o.theta)))
        optimal = 0.0
        for key, m in mass.items():
            a = profile[deviator].action(key, llrs)
            if m[1 - a] > m[a]:
                a = 1 - a
            best.actions[key] = a
            optimal += float(m[a])
        gain += optimal - current
    return Deviation(deviator, mode, best, baseline + gain, baseline, len(best.actions))


def _fixed_policies(game, profile, deviator, dev_policy):
    llrs = binary_llrs(game.model)
    return [dev_policy if i == deviator else _table_policy(profile[i], llrs) for i in range(game.n)]


def _exhaustive(game: MicroGame, profile, deviator: int):
    if game.T > 2:
        raise ResourceError(f"exhaustive strategy enumeration supports T <= 2 (got T={game.T}); "
                            "use backward or one-shot mode")
    o = _Outcomes(game)
    first_keys = [((0,), ()), ((1,), ())]
    best = (-math.inf, None)
    total = 0
    plans = list(itertools.product((B, G), repeat=len(first_keys)))
    # each first-period plan fixes which later information sets are reachable;
    # later actions affect nobody else's information before the horizon
    sizes = []
    staged = []
    for plan in plans:
        first = dict(zip(first_keys, plan))
        fixed = StrategyTable(deviator, dict(first))
        llrs = binary_llrs(game.model)
        pol = _fixed_policies(game, profile, deviator, _table_policy(fixed, llrs))
        pl = play(game, pol, o)
        u1 = game.weight(1) * float(np.sum(o.w * (pl.actions[:, deviator, 0] == o.theta)))
        if game.T == 1:
            staged.append((first, u1, [], np.zeros((0, 2))))
            sizes.append(1)
            continue
        contrib: dict = {}
        for k, key in enumerate(pl.keys[1][deviator]):
            c = contrib.setdefault(key, np.zeros(2))
            c[o.theta[k]] += o.w[k] * game.weight(2)
        keys2 = sorted(contrib)
        staged.append((first, u1, keys2, np.array([contrib[k] for k in keys2])))
        sizes.append(2 ** len(keys2))
    total = sum(sizes)
    if total > game.budget:
        raise ResourceError(f"deviator strategy space has {total} strategies (budget {game.budget})")
    for (first, u1, keys2, C), size in zip(staged, sizes):
        if not keys2:
            cand = [(u1, ())]
        else:
            bits = ((np.arange(size)[:, None] >> np.arange(len(keys2))) & 1).astype(np.int8)
            vals = u1 + bits @ C[:, G] + (1 - bits) @ C[:, B]
            j = int(np.argmax(vals))
            cand = [(float(vals[j]), tuple(int(b) for b in bits[j]))]
        for val, choice in cand:
            if val > best[0] + GAIN_TOL / 10:
                acts = dict(first)
                acts.update(zip(keys2, choice))
                best = (val, StrategyTable(deviator, acts))
    return best[1], best[0], total


def _backward(game: MicroGame, profile, deviator: int):
    o = _Outcomes(game)
    llrs = binary_llrs(game.model)
    others = {i: profile[i] for i in range(game.n) if i != deviator}
    table: dict = {}
    counter = [0]

    def solve(t: int, idx: np.ndarray, acts: np.ndarray) -> float:
        """Best value from period t on for outcomes idx sharing one deviator information set."""
        counter[0] += 1
        if counter[0] > game.budget:
            raise ResourceError(f"backward induction exceeded {game.budget} information-set nodes")
        key = _key(game.net, deviator, t, o.sig[idx[0]], acts[idx[0]])
        w, th = o.w[idx], o.theta[idx]
        best_val, best_a = -math.inf, None
        for a in (G, B):
            val = game.weight(t) * float(np.sum(w[th == a]))
            if t < game.T:
                nxt = acts[idx].copy()
                nxt[:, deviator, t - 1] = a
                for j, tb in others.items():
                    for r, k in enumerate(idx):
                        nxt[r, j, t - 1] = tb.action(_key(game.net, j, t, o.sig[k], acts[k]), llrs)
                full = acts.copy()
                full[idx] = nxt
                groups: dict = {}
                for r, k in enumerate(idx):
                    groups.setdefault(_key(game.net, deviator, t + 1, o.sig[k], full[k]), []).append(k)
                for members in groups.values():
                    val += solve(t + 1, np.array(members), full)
            if val > best_val + GAIN_TOL / 10:
                best_val, best_a = val, a
        table[key] = best_a
        return best_val

    acts0 = np.zeros((o.K, game.n, game.T), dtype=np.int8)
    total = 0.0
    groups: dict = {}
    for k in range(o.K):
        groups.setdefault(_key(game.net, deviator, 1, o.sig[k], acts0[k]), []).append(k)
    for members in groups.values():
        total += solve(1, np.array(members), acts0)
    return StrategyTable(deviator, table), total, counter[0]


def _one_shot(game: MicroGame, profile, deviator: int, baseline: float):
    o = _Outcomes(game)
    llrs = binary_llrs(game.model)
    base = play(game, _fixed_policies(game, profile, deviator, _table_policy(profile[deviator], llrs)), o)
    on_path = []
    for t in range(1, game.T + 1):
        for k, key in enumerate(base.keys[t - 1][deviator]):
            if o.w[k] > 0 and (t, key) not in on_path:
                on_path.append((t, key))
    best = (baseline, StrategyTable(deviator, dict(profile[deviator].actions)))
    for t0, key0 in on_path:
        flipped = 1 - profile[deviator].action(key0, llrs)

        def decide(t, keys, oo, t0=t0, key0=key0, flipped=flipped):
            post = _posterior(keys, oo.w, oo.theta) if t > t0 else None
            out = np.empty(len(keys), dtype=np.int8)
            for r, key in enumerate(keys):
                if t == t0 and key == key0:
                    out[r] = flipped
                elif t > t0 and _extends(key, key0):
                    out[r] = myopic_action(post[key])
                else:
                    out[r] = profile[deviator].action(key, llrs)
            return out

        pl = play(game, _fixed_policies(game, profile, deviator, decide), o)
        acc = pl.accuracy()[deviator]
        u = float(sum(game.weight(t) * acc[t - 1] for t in range(1, game.T + 1)))
        if u > best[0] + GAIN_TOL / 10:
            best = (u, _tables_from_play(game, pl)[deviator])
    return best[1], best[0], len(on_path)


def _extends(key, prefix) -> bool:
    own, obs = key
    own0, obs0 = prefix
    return own[: len(own0)] == own0 and obs[: len(obs0)] == obs0


def is_equilibrium(game: MicroGame, profile, mode: str | None = None) -> tuple[bool, list[Deviation]]:
    """Certify a profile: no agent gains more than 1e-12 by deviating."""
    mode = mode or ("exhaustive" if game.T <= 2 else "backward")
    devs = [best_deviation(game, profile, i, mode) for i in range(game.n)]
    return all(d.gain <= GAIN_TOL for d in devs), devs


@dataclass
class ThresholdReport:
    threshold: float
    certified: bool
    entries: list[dict]
    first_crossing: dict

    @property
    def violations(self) -> list[dict]:
        return [e for e in self.entries if e["status"] == "violation"]

    def counts(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e["status"]] = out.get(e["status"], 0) + 1
        return out

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "certified": self.certified,
                "counts": self.counts(), "violations": self.violations,
                "first_crossing": self.first_crossing}


def check_lemma1_threshold(game: MicroGame, profile, certified: bool | None = None) -> ThresholdReport:
    """Check that play is myopic wherever |L| reaches -log(1 - delta).

    Each reachable information set gets a status: ``pass``, ``violation``,
    ``below threshold`` (not covered), or ``tie`` (|L| within the tie
    tolerance, where both actions are myopic).  ``first_crossing`` tallies,
    over outcomes, the first period at which every agent's |L| is at or
    above the threshold (``None`` if never within the horizon).
    """
    _check_profile(game, profile)
    if certified is None:
        certified = is_equilibrium(game, profile)[0]
    llrs = binary_llrs(game.model)
    pl = play(game, [_table_policy(tb, llrs) for tb in profile])
    o = pl.outcomes
    thr = game.threshold
    entries = []
    covered = np.zeros((o.K, game.T), dtype=bool)
    covered[:] = True
    for t in range(1, game.T + 1):
        for i in range(game.n):
            keys = pl.keys[t - 1][i]
            post = _posterior(keys, o.w, o.theta)
            acts = {}
            for k, key in enumerate(keys):
                acts.setdefault(key, int(pl.actions[k, i, t - 1]))
                covered[k, t - 1] &= abs(post[key]) >= thr
            for key, L in post.items():
                a = acts[key]
                if abs(L) < TIE_TOL:
                    status = "tie"
                elif abs(L) < thr:
                    status = "below threshold"
                elif a == myopic_action(L):
                    status = "pass"
                else:
                    status = "violation"
                entries.append({"agent": i, "t": t, "own_signals": list(key[0]),
                                "observed": [list(x) for x in key[1]], "L": L, "action": a, "status": status})
    first: dict = {}
    for k in range(o.K):
        hits = np.flatnonzero(covered[k])
        label = str(int(hits[0]) + 1) if len(hits) else "none"
        first[label] = first.get(label, 0.0) + float(o.w[k])
    return ThresholdReport(thr, certified, entries, first)


def check_deviation_bound(game: MicroGame, profile) -> ImitationReport:
    """Exact imitation bound P[a_t^i != Theta] <= P[a_{t-1}^j != Theta] / (1 - delta) along edges."""
    _check_profile(game, profile)
    llrs = binary_llrs(game.model)
    pl = play(game, [_table_policy(tb, llrs) for tb in profile])
    return check_imitation(pl.mistake_curve(), game.net, game.delta)


def best_response_candidates(game: MicroGame, starts: list[list[StrategyTable]], max_rounds: int = 20):
    """Equilibrium candidates reached by best-response iteration from each start.

    Returns the certified fixed points (deduplicated by their tables).
    """
    found = []
    seen = set()
    mode = "exhaustive" if game.T <= 2 else "backward"
    for start in starts:
        prof = [StrategyTable(tb.agent, dict(tb.actions)) for tb in start]
        for _ in range(max_rounds):
            changed = False
            for i in range(game.n):
                dev = best_deviation(game, prof, i, mode)
                if dev.gain > GAIN_TOL:
                    prof[i] = dev.table
                    changed = True
            if not changed:
                break
        ok, _ = is_equilibrium(game, prof, mode)
        if ok:
            sig = tuple(tuple(sorted(tb.actions.items())) for tb in prof)
            if sig not in seen:
                seen.add(sig)
                found.append(prof)
    return found
