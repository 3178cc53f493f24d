"""Conditional signal distributions.

A signal distribution is a pair of probability vectors over a finite alphabet,
one per state.  States and actions are encoded as integers throughout the
package: ``1`` is *g* and ``0`` is *b*.  Signals are encoded as indices into
their alphabet; the symmetric binary alphabet is ``("b", "g")`` so that the
index of a binary signal coincides with the state it points to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigError

B, G = 0, 1
STATE_NAMES = ("b", "g")

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SignalDist:
    """Signal alphabet with its conditional distributions under g and b."""

    alphabet: tuple[str, ...]
    pg: np.ndarray
    pb: np.ndarray

    def __post_init__(self):
        alphabet = tuple(str(a) for a in self.alphabet)
        if len(alphabet) == 0 or len(set(alphabet)) != len(alphabet):
            raise ConfigError(f"alphabet must be non-empty and unique: {alphabet}")
        pg = _checked_probs(self.pg, len(alphabet), "g")
        pb = _checked_probs(self.pb, len(alphabet), "b")
        if np.any((pg > 0) != (pb > 0)):
            raise ConfigError(
                "signal distributions are not mutually absolutely continuous: "
                f"pg={pg.tolist()} pb={pb.tolist()}"
            )
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "pg", pg)
        object.__setattr__(self, "pb", pb)

    @property
    def size(self) -> int:
        return len(self.alphabet)

    def probs(self, theta: int) -> np.ndarray:
        return self.pg if theta == G else self.pb

    def index(self, symbol) -> int:
        """Index of a symbol (given by name or by index)."""
        if isinstance(symbol, (int, np.integer)) and not isinstance(symbol, bool):
            if 0 <= symbol < self.size:
                return int(symbol)
        else:
            try:
                return self.alphabet.index(str(symbol))
            except ValueError:
                pass
        raise ConfigError(f"unknown signal {symbol!r}; alphabet is {self.alphabet}")

    def llrs(self) -> np.ndarray:
        """Per-symbol log(pg/pb); zero-probability symbols get 0."""
        out = np.zeros(self.size)
        pos = self.pg > 0
        out[pos] = np.log(self.pg[pos]) - np.log(self.pb[pos])
        return out

    def log_probs(self, theta: int) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs(theta))

    def same_as(self, other: "SignalDist") -> bool:
        return (
            self.alphabet == other.alphabet
            and np.array_equal(self.pg, other.pg)
            and np.array_equal(self.pb, other.pb)
        )


def _checked_probs(values, size: int, state: str) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ConfigError(f"distribution under {state} has {arr.size} entries, expected {size}")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise ConfigError(f"distribution under {state} has negative or non-finite entries")
    total = arr.sum()
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ConfigError(f"distribution under {state} sums to {total!r}, not 1")
    arr = arr / total
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Signal distributions for every agent and period.

    ``default`` applies everywhere except the ``(agent, period)`` keys in
    ``overrides``; agents are 0-based and periods 1-based.
    """

    default: SignalDist
    overrides: Mapping[tuple[int, int], SignalDist] = field(default_factory=dict)
    kind: str = "table"
    p: float | None = None

    @property
    def stationary(self) -> bool:
        return all(d.same_as(self.default) for d in self.overrides.values())

    def dist(self, agent: int, t: int) -> SignalDist:
        return self.overrides.get((agent, t), self.default)

    def alphabet_size(self, agent: int, t: int) -> int:
        return self.dist(agent, t).size

    def to_dict(self) -> dict:
        if self.kind == "symmetric_binary" and not self.overrides:
            return {"kind": "symmetric_binary", "p": self.p}
        out = {
            "kind": "table",
            "alphabet": list(self.default.alphabet),
            "g": self.default.pg.tolist(),
            "b": self.default.pb.tolist(),
        }
        if self.overrides:
            out["overrides"] = [
                {
                    "agent": i,
                    "t": t,
                    "alphabet": list(d.alphabet),
                    "g": d.pg.tolist(),
                    "b": d.pb.tolist(),
                }
                for (i, t), d in sorted(self.overrides.items())
            ]
        return out


def make_symmetric_binary(p: float) -> SignalModel:
    """Binary signal equal to the state with probability ``p``."""
    p = float(p)
    if not 0.5 <= p < 1.0:
        raise ConfigError(f"symmetric binary accuracy must lie in [0.5, 1), got {p}")
    dist = SignalDist(("b", "g"), np.array([1 - p, p]), np.array([p, 1 - p]))
    return SignalModel(dist, kind="symmetric_binary", p=p)


def make_table(alphabet, g, b, overrides=None) -> SignalModel:
    """Explicit signal tables; ``overrides`` maps (agent, t) to (alphabet, g, b)."""
    default = SignalDist(tuple(alphabet), np.asarray(g, float), np.asarray(b, float))
    extra = {}
    for key, (alpha, og, ob) in (overrides or {}).items():
        agent, t = key
        if agent < 0 or t < 1:
            raise ConfigError(f"override key {key} out of range (agents 0-based, periods 1-based)")
        extra[(int(agent), int(t))] = SignalDist(tuple(alpha), np.asarray(og, float), np.asarray(ob, float))
    return SignalModel(default, extra, kind="table")


def model_from_dict(data: Mapping) -> SignalModel:
    kind = data.get("kind")
    if kind == "symmetric_binary":
        return make_symmetric_binary(data["p"])
    if kind == "table":
        overrides = {
            (o["agent"], o["t"]): (o["alphabet"], o["g"], o["b"]) for o in data.get("overrides", [])
        }
        return make_table(data["alphabet"], data["g"], data["b"], overrides)
    raise ConfigError(f"unknown signal kind {kind!r}")


def llr(model: SignalModel, agent: int, t: int, symbol) -> float:
    """log(mu_g(symbol) / mu_b(symbol)) for agent ``agent`` at period ``t``."""
    dist = model.dist(agent, t)
    k = dist.index(symbol)
    if dist.pg[k] == 0:
        raise ConfigError(f"signal {symbol!r} has probability zero")
    return math.log(dist.pg[k]) - math.log(dist.pb[k])


def compute_M(model: SignalModel) -> float:
    """Twice the largest absolute per-signal log-likelihood ratio."""
    dists = [model.default, *model.overrides.values()]
    return 2.0 * max(float(np.max(np.abs(d.llrs()))) for d in dists)


def binary_llrs(model: SignalModel) -> tuple[float, float]:
    """(llr of symbol 1, llr of symbol 0) for a stationary binary model.

    Raises unless the model is stationary, binary, and symbol 1 is at least
    as indicative of g as symbol 0 (so the posterior is non-decreasing in the
    count of symbol-1 signals).
    """
    if not model.stationary or model.default.size != 2:
        raise ConfigError("a stationary binary signal model is required")
    l0, l1 = model.default.llrs()
    if np.any(model.default.pg == 0):
        raise ConfigError("binary signals must both have positive probability")
    if l1 < l0:
        raise ConfigError("symbol 1 must be the g-leaning signal (llr[1] >= llr[0])")
    return float(l1), float(l0)


def sample_signals(model: SignalModel, theta: int, n: int, T: int, seed) -> np.ndarray:
    """Draw an n x T matrix of signal indices under state ``theta``."""
    if n < 1 or T < 1:
        raise ConfigError("n and T must be positive")
    rng = np.random.default_rng(seed)
    thetas = np.full(1, int(theta), dtype=np.int8)
    return draw_signals(model, thetas, n, T, rng)[0]


def draw_signals(model: SignalModel, thetas: np.ndarray, n: int, T: int, rng) -> np.ndarray:
    """Signals of shape (len(thetas), n, T) given per-trial states."""
    batch = len(thetas)
    u = rng.random((batch, n, T))
    if model.stationary:
        return _inverse_cdf(model.default, thetas[:, None, None], u)
    out = np.empty((batch, n, T), dtype=np.int8)
    for i in range(n):
        for t in range(1, T + 1):
            out[:, i, t - 1] = _inverse_cdf(model.dist(i, t), thetas, u[:, i, t - 1])
    return out


def _inverse_cdf(dist: SignalDist, thetas: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf_g = np.cumsum(dist.pg)[:-1]
    cdf_b = np.cumsum(dist.pb)[:-1]
    if dist.size == 2:
        # common fast path
        thresh = np.where(thetas == G, cdf_g[0], cdf_b[0])
        return (u >= thresh).astype(np.int8)
    idx_g = np.searchsorted(cdf_g, u, side="right")
    idx_b = np.searchsorted(cdf_b, u, side="right")
    return np.where(thetas == G, idx_g, idx_b).astype(np.int8)
