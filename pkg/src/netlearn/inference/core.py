"""Belief containers and the myopic decision rule shared by every engine."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..signals import B, G

# An agent with |L| below TIE_TOL is treated as exactly indifferent and plays
# the tie action.  All engines use the same rule so their actions agree on
# last-bit differences.
TIE_TOL = 1e-9
TIE_ACTION = G


@dataclass(frozen=True)
class BeliefState:
    """Posterior of one agent at one period, all likelihoods in nats."""

    L: float
    S: float
    P: float

    @property
    def p(self) -> float:
        return 1.0 / (1.0 + math.exp(-self.L)) if self.L > -700 else 0.0


def myopic_action(belief, tie_action: int = TIE_ACTION) -> int:
    """g when the posterior favours g, b when it favours b, ``tie_action`` when indifferent.

    Accepts a :class:`BeliefState` or a bare posterior log-odds.
    """
    L = belief.L if isinstance(belief, BeliefState) else float(belief)
    if L > TIE_TOL:
        return G
    if L < -TIE_TOL:
        return B
    return tie_action


def myopic_actions(L: np.ndarray, tie_action: int = TIE_ACTION) -> np.ndarray:
    """Vectorized :func:`myopic_action` on an array of log-odds."""
    if tie_action == G:
        return (L >= -TIE_TOL).astype(np.int8)
    return (L > TIE_TOL).astype(np.int8)


def count_threshold(llr_by_count: np.ndarray, offset, tie_action: int = TIE_ACTION):
    """Smallest own-count k whose action is g, given ``L = llr_by_count[k] + offset``.

    ``llr_by_count`` must be non-decreasing.  Returns values in ``0..len``;
    ``len`` means no count leads to g.
    """
    offset = np.asarray(offset, dtype=float)
    side = "left" if tie_action == G else "right"
    bound = -TIE_TOL - offset if tie_action == G else TIE_TOL - offset
    return np.searchsorted(llr_by_count, bound, side=side)


@dataclass
class Beliefs:
    """Beliefs and actions for a batch of signal matrices.

    Arrays have shape (batch, n, T); period t lives at index t-1.
    """

    actions: np.ndarray
    L: np.ndarray
    S: np.ndarray
    P: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-np.clip(self.L, -700, 700)))

    def tied(self) -> np.ndarray:
        return np.abs(self.L) < TIE_TOL

    def state(self, b: int, i: int, t: int) -> BeliefState:
        k = t - 1
        return BeliefState(float(self.L[b, i, k]), float(self.S[b, i, k]), float(self.P[b, i, k]))

    def __len__(self):
        return self.actions.shape[0]
