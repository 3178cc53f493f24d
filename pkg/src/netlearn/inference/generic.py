"""Exact myopic dynamics on any network by enumerating signal prefixes.

Every joint signal prefix of length t (all agents, periods 1..t) is given a
mixed-radix index whose digit at position ``(tau - 1) * n + j`` is agent j's
signal at period tau.  Because digits are ordered by period, the length-t
prefix of a matrix with full index ``k`` is simply ``k % K_t``.

Period by period the engine computes, for every prefix,

* ``L`` by grouping prefixes on agent i's information set (own signal code,
  observed-action code) and taking the log-ratio of group masses;
* ``S`` by grouping length-(t-1) prefixes on the observed-action code only
  (an outside observer who sees H^i_t);
* ``P`` from the consistency set of agent i's own signals: its own-signal
  LLR plus log mu_b(C) - log mu_g(C), where C is the set of own prefixes that
  co-occur with H^i_t on reachable prefixes.

The three are computed separately, so ``L == S + P`` is a genuine check.
"""

from __future__ import annotations

import math

import numpy as np

from ..curves import MistakeCurve
from ..errors import ConfigError, ResourceError, UnreachableInformationSet
from ..network import Network
from ..signals import B, G, SignalModel
from .core import TIE_ACTION, Beliefs, myopic_actions

DEFAULT_BUDGET = 2 ** 26
_MAX_KEY_BITS = 62
BYTES_PER_STEP = 128  # measured peak is about 110
DEFAULT_MEMORY_LIMIT = 2 * 2 ** 30


def enumeration_steps(model: SignalModel, n: int, T: int) -> int:
    """Weighted enumeration steps the generic engine needs: sum_t K_t * n."""
    steps, K = 0, 1
    for t in range(1, T + 1):
        for j in range(n):
            K *= model.alphabet_size(j, t)
        steps += K * n
    return steps


def _group_lse(inv: np.ndarray, n_groups: int, x: np.ndarray) -> np.ndarray:
    """log-sum-exp of ``x`` within groups given by ``inv``."""
    gmax = np.full(n_groups, -np.inf)
    np.maximum.at(gmax, inv, x)
    safe = np.where(np.isfinite(gmax), gmax, 0.0)
    with np.errstate(invalid="ignore"):
        tot = np.bincount(inv, weights=np.exp(x - safe[inv]), minlength=n_groups)
    with np.errstate(divide="ignore"):
        return np.where(np.isfinite(gmax), safe + np.log(tot), -np.inf)


class GenericEngine:
    """Myopic action maps and beliefs for every signal prefix up to horizon T."""

    name = "generic"

    def __init__(self, model: SignalModel, net: Network, T: int,
                 budget: int = DEFAULT_BUDGET, tie_action: int = TIE_ACTION,
                 memory_limit: int = DEFAULT_MEMORY_LIMIT):
        if T < 1:
            raise ConfigError("T must be >= 1")
        self.model, self.net, self.T, self.n = model, net, T, net.n
        self.tie_action = tie_action
        n = self.n
        self.steps = enumeration_steps(model, n, T)
        if self.steps > budget:
            sizes = sorted({model.alphabet_size(j, t) for j in range(n) for t in range(1, T + 1)})
            raise ResourceError(
                f"generic enumeration needs {self.steps} steps > budget {budget} "
                f"(n={n}, T={T}, |Omega|={sizes[0] if len(sizes) == 1 else sizes})"
            )
        if self.steps * BYTES_PER_STEP > memory_limit:
            raise ResourceError(
                f"generic enumeration for n={n}, T={T} needs about {self.steps * BYTES_PER_STEP / 2 ** 30:.1f} GiB "
                f"> memory limit {memory_limit / 2 ** 30:.1f} GiB"
            )
        for i in range(n):
            bits = len(net.neighbors[i]) * (T - 1)
            own_space = math.prod(model.alphabet_size(i, t) for t in range(1, T + 1))
            if bits + own_space.bit_length() > _MAX_KEY_BITS:
                raise ResourceError(f"information-set keys for agent {i} exceed {_MAX_KEY_BITS} bits")

        self.radix = np.array([model.alphabet_size(j, t) for t in range(1, T + 1) for j in range(n)],
                              dtype=np.int64)
        self.place = np.concatenate([[1], np.cumprod(self.radix)]).astype(np.int64)
        self.K = [int(self.place[t * n]) for t in range(T + 1)]
        # per-period tables, index t-1
        self.actions: list[np.ndarray] = []
        self.L: list[np.ndarray] = []
        self.S: list[np.ndarray] = []  # shape (K_{t-1}, n)
        self.P: list[np.ndarray] = []
        self.logw: list[np.ndarray] = []  # shape (2, K_t)
        self.reachable: list[np.ndarray] = []
        self._info_keys: list[list[np.ndarray]] = []
        self._info_actions: list[list[np.ndarray]] = []
        self._info_L: list[list[np.ndarray]] = []
        self._build()

    # -- construction ----------------------------------------------------

    def _digits(self, t: int) -> np.ndarray:
        """Signals at period t of every length-t prefix, shape (K_t, n)."""
        k = np.arange(self.K[t], dtype=np.int64)
        base = (t - 1) * self.n
        return np.stack([(k // self.place[base + j]) % self.radix[base + j] for j in range(self.n)], axis=1)

    def _build(self):
        n, net, model = self.n, self.net, self.model
        logw = np.zeros((2, 1))
        own_code = np.zeros((1, n), dtype=np.int64)
        own_space = np.ones(n, dtype=np.int64)
        own_logw = np.zeros((2, 1, n))
        hcode = np.zeros((1, n), dtype=np.int64)  # observed actions before t, for length t-1 prefixes
        nb_index = [{j: q for q, j in enumerate(nb)} for nb in net.neighbors]

        for t in range(1, self.T + 1):
            Kp, Kt = self.K[t - 1], self.K[t]
            parent = np.arange(Kt, dtype=np.int64) % Kp
            sig = self._digits(t)
            step_logp = np.zeros((2, Kt, n))
            for j in range(n):
                d = model.dist(j, t)
                for th in (B, G):
                    step_logp[th, :, j] = d.log_probs(th)[sig[:, j]]
            new_logw = logw[:, parent] + step_logp.sum(axis=2)
            new_own_logw = own_logw[:, parent, :] + step_logp
            new_own_code = own_code[parent] + sig * own_space
            new_own_space = own_space * np.array([model.alphabet_size(j, t) for j in range(n)])
            reach = np.isfinite(new_logw[G])
            h_par = hcode[parent]

            L = np.empty((Kt, n))
            S = np.empty((Kp, n))
            P = np.empty((Kt, n))
            keys_t, acts_t, Ls_t = [], [], []
            for i in range(n):
                # posterior on agent i's information set
                key = h_par[:, i] * new_own_space[i] + new_own_code[:, i]
                ukeys, inv = np.unique(key, return_inverse=True)
                lg = _group_lse(inv, len(ukeys), new_logw[G])
                lb = _group_lse(inv, len(ukeys), new_logw[B])
                with np.errstate(invalid="ignore"):
                    Lg = np.where(np.isfinite(lg), lg - lb, np.nan)
                L[:, i] = Lg[inv]
                keys_t.append(ukeys)
                acts_t.append(myopic_actions(Lg, self.tie_action))
                Ls_t.append(Lg)

                # outside observer of H^i_t
                uh, hinv = np.unique(hcode[:, i], return_inverse=True)
                sg = _group_lse(hinv, len(uh), logw[G])
                sb = _group_lse(hinv, len(uh), logw[B])
                with np.errstate(invalid="ignore"):
                    S[:, i] = np.where(np.isfinite(sg), sg - sb, np.nan)[hinv]

                # consistency set of own signals for each observed history
                prev_reach = np.isfinite(logw[G])
                pair = hcode[prev_reach, i] * own_space[i] + own_code[prev_reach, i]
                upair, first = np.unique(pair, return_index=True)
                pair_h = upair // own_space[i]
                u_logw = own_logw[:, prev_reach, i][:, first]
                ch, cinv = np.unique(pair_h, return_inverse=True)
                cg = _group_lse(cinv, len(ch), u_logw[G])
                cb = _group_lse(cinv, len(ch), u_logw[B])
                pos = np.searchsorted(ch, h_par[:, i])
                pos = np.minimum(pos, len(ch) - 1)
                found = ch[pos] == h_par[:, i]
                own_llr = new_own_logw[G, :, i] - new_own_logw[B, :, i]
                with np.errstate(invalid="ignore"):
                    P[:, i] = np.where(found & reach, own_llr + cb[pos] - cg[pos], np.nan)

            A = myopic_actions(L, self.tie_action)
            # extend observed-action codes with period-t actions
            new_h = h_par.copy()
            for i in range(n):
                width = len(net.neighbors[i])
                for j in net.neighbors[i]:
                    bit = width * (t - 1) + nb_index[i][j]
                    new_h[:, i] |= A[:, j].astype(np.int64) << bit

            self.actions.append(A)
            self.L.append(L)
            self.S.append(S)
            self.P.append(P)
            self.logw.append(new_logw)
            self.reachable.append(reach)
            self._info_keys.append(keys_t)
            self._info_actions.append(acts_t)
            self._info_L.append(Ls_t)
            logw, own_logw, own_code, own_space, hcode = new_logw, new_own_logw, new_own_code, new_own_space, new_h

    # -- queries -----------------------------------------------------------

    def index(self, signals: np.ndarray) -> np.ndarray:
        """Full mixed-radix index of each (n, T) signal matrix in a batch."""
        sig = np.asarray(signals, dtype=np.int64)
        if sig.ndim == 2:
            sig = sig[None]
        if sig.shape[1:] != (self.n, self.T):
            raise ConfigError(f"signal matrices must have shape ({self.n}, {self.T}), got {sig.shape[1:]}")
        flat = sig.transpose(0, 2, 1).reshape(len(sig), -1)
        if np.any(flat < 0) or np.any(flat >= self.radix):
            raise ConfigError("signal index outside its alphabet")
        return flat @ self.place[:-1]

    def run(self, signals: np.ndarray) -> Beliefs:
        """Beliefs and actions along the realized dynamics for a batch of signal matrices."""
        idx = self.index(signals)
        Bsz = len(idx)
        out = Beliefs(
            actions=np.empty((Bsz, self.n, self.T), dtype=np.int8),
            L=np.empty((Bsz, self.n, self.T)),
            S=np.empty((Bsz, self.n, self.T)),
            P=np.empty((Bsz, self.n, self.T)),
        )
        for t in range(1, self.T + 1):
            k = idx % self.K[t]
            if not np.all(self.reachable[t - 1][k]):
                raise UnreachableInformationSet(f"signal matrix has probability zero at period {t}")
            out.actions[:, :, t - 1] = self.actions[t - 1][k]
            out.L[:, :, t - 1] = self.L[t - 1][k]
            out.S[:, :, t - 1] = self.S[t - 1][idx % self.K[t - 1]]
            out.P[:, :, t - 1] = self.P[t - 1][k]
        return out

    def exact_curve(self) -> MistakeCurve:
        """Exact P[a_t^i != theta | theta] by summing prefix weights."""
        log_p = np.full((2, self.n, self.T), -np.inf)
        for t in range(1, self.T + 1):
            A = self.actions[t - 1]
            w = self.logw[t - 1]
            for th in (B, G):
                for i in range(self.n):
                    wrong = (A[:, i] != th) & np.isfinite(w[th])
                    if wrong.any():
                        x = w[th][wrong]
                        m = x.max()
                        log_p[th, i, t - 1] = m + math.log(np.exp(x - m).sum())
        return MistakeCurve("exact_forward", self.n, self.T, log_p=log_p)

    def total_log_mass(self, t: int) -> tuple[float, float]:
        """log of the total prefix weight under (b, g) at period t; both should be 0."""
        w = self.logw[t - 1]
        return tuple(float(np.logaddexp.reduce(w[th])) for th in (B, G))

    def action_map(self, i: int, t: int) -> dict:
        """Myopic actions of agent i at period t keyed by information set.

        Keys are ``(own_signals, observed)`` with ``own_signals`` a tuple of
        signal indices for periods 1..t and ``observed`` a tuple, per period
        before t, of the actions of ``net.neighbors[i]`` in order.  Only
        reachable information sets appear.
        """
        return {k: a for k, (a, _) in self._info_sets(i, t).items()}

    def posterior_map(self, i: int, t: int) -> dict:
        """Posterior log-odds L at every reachable information set (same keys as action_map)."""
        return {k: L for k, (_, L) in self._info_sets(i, t).items()}

    def posterior(self, i: int, t: int, key) -> float:
        """Posterior log-odds at one information set; unreachable sets raise."""
        post = self.posterior_map(i, t)
        if key not in post:
            raise UnreachableInformationSet(f"information set {key!r} of agent {i} at t={t} has probability zero")
        return post[key]

    def _info_sets(self, i: int, t: int) -> dict:
        keys = self._info_keys[t - 1][i]
        acts = self._info_actions[t - 1][i]
        Ls = self._info_L[t - 1][i]
        radices = [self.model.alphabet_size(i, tau) for tau in range(1, t + 1)]
        own_space = math.prod(radices)
        width = len(self.net.neighbors[i])
        out = {}
        for key, a, L in zip(keys.tolist(), acts.tolist(), Ls.tolist()):
            if not np.isfinite(L):
                continue
            h, own = divmod(key, own_space)
            sig = []
            for r in radices:
                own, d = divmod(own, r)
                sig.append(d)
            observed = tuple(
                tuple((h >> (width * tau + q)) & 1 for q in range(width)) for tau in range(t - 1)
            )
            out[(tuple(sig), observed)] = (int(a), float(L))
        return out
