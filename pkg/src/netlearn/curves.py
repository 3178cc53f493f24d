"""Mistake-probability curves P[a_t^i != Theta] and their CSV form."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .signals import B, G

MODES = ("monte_carlo", "exact_forward", "analytic")
CURVE_COLUMNS = (
    "state_conditioning", "agent", "t", "mistakes", "trials", "p_hat", "log_p_hat", "se",
)
CHUNK_COLUMNS = ("chunk", "state", "agent", "t", "mistakes", "trials")
_STATE_INDEX = {"g": G, "b": B}


@dataclass
class MistakeCurve:
    """Per-agent, per-period mistake probabilities.

    Monte Carlo curves hold integer counts indexed ``[theta, agent, t-1]``
    (and the same per chunk of trials, for bootstrapping).  Exact curves hold
    ``log_p[theta, agent, t-1] = log P[a_t != theta | Theta = theta]``.
    """

    mode: str
    n: int
    T: int
    mistakes: np.ndarray | None = None
    trials: np.ndarray | None = None
    chunk_mistakes: np.ndarray | None = None
    chunk_trials: np.ndarray | None = None
    log_p: np.ndarray | None = None
    labels: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown curve mode {self.mode!r}")
        if not self.labels:
            self.labels = [str(i) for i in range(self.n)]

    @property
    def exact(self) -> bool:
        return self.mode != "monte_carlo"

    @property
    def ts(self) -> np.ndarray:
        return np.arange(1, self.T + 1)

    # -- estimates ---------------------------------------------------------

    def log_p_hat(self, state: str | None = None) -> np.ndarray:
        """log of the (estimated or exact) mistake probability, shape (n, T)."""
        if self.exact:
            if state is None:
                return np.logaddexp(self.log_p[G], self.log_p[B]) - math.log(2)
            return self.log_p[_STATE_INDEX[state]].copy()
        with np.errstate(divide="ignore"):
            return np.log(self.p_hat(state))

    def p_hat(self, state: str | None = None) -> np.ndarray:
        if self.exact:
            return np.exp(self.log_p_hat(state))
        m, n = self.counts(state)
        return m / np.maximum(n, 1)

    def counts(self, state: str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(mistakes (n, T), trials (n, T)) for Monte Carlo curves."""
        if self.exact:
            raise ConfigError("exact curves carry no counts")
        if state is None:
            m = self.mistakes.sum(axis=0)
            n = int(self.trials.sum())
        else:
            s = _STATE_INDEX[state]
            m = self.mistakes[s]
            n = int(self.trials[s])
        return m, np.full(m.shape, n, dtype=np.int64)

    def se(self, state: str | None = None) -> np.ndarray:
        """Binomial standard error of p_hat (zero for exact curves)."""
        if self.exact:
            return np.zeros((self.n, self.T))
        p = self.p_hat(state)
        _, n = self.counts(state)
        return np.sqrt(p * (1 - p) / np.maximum(n, 1))

    def accuracy(self) -> np.ndarray:
        return 1.0 - self.p_hat()

    # -- transformations ---------------------------------------------------

    def pool(self, agents, label: str | None = None) -> "MistakeCurve":
        """Merge exchangeable agents into one pseudo-agent.

        Counts and trials are summed, so the pooled estimate is the average
        mistake rate over the pooled agents.
        """
        agents = list(agents)
        label = label or "+".join(self.labels[a] for a in agents)
        if self.exact:
            lp = np.logaddexp.reduce(self.log_p[:, agents, :], axis=1) - math.log(len(agents))
            return MistakeCurve(self.mode, 1, self.T, log_p=lp[:, None, :], labels=[label])
        k = len(agents)
        cm = self.chunk_mistakes[:, :, agents, :].sum(axis=2, keepdims=True)
        return MistakeCurve(
            self.mode, 1, self.T,
            mistakes=self.mistakes[:, agents, :].sum(axis=1, keepdims=True),
            trials=self.trials * k,
            chunk_mistakes=cm,
            chunk_trials=self.chunk_trials * k,
            labels=[label],
        )

    def select(self, agents) -> "MistakeCurve":
        agents = list(agents)
        labels = [self.labels[a] for a in agents]
        if self.exact:
            return MistakeCurve(self.mode, len(agents), self.T, log_p=self.log_p[:, agents], labels=labels)
        return MistakeCurve(
            self.mode, len(agents), self.T,
            mistakes=self.mistakes[:, agents], trials=self.trials,
            chunk_mistakes=self.chunk_mistakes[:, :, agents], chunk_trials=self.chunk_trials,
            labels=labels,
        )

    # -- tabular I/O -------------------------------------------------------

    def rows(self):
        """Rows for the CSV table: unconditional first, then per state."""
        for state in (None, "g", "b"):
            lp = self.log_p_hat(state)
            p = self.p_hat(state)
            se = self.se(state)
            if not self.exact:
                m, n = self.counts(state)
            for i in range(self.n):
                for k in range(self.T):
                    row = {
                        "state_conditioning": state or "all",
                        "agent": self.labels[i],
                        "t": k + 1,
                        "mistakes": "" if self.exact else int(m[i, k]),
                        "trials": "" if self.exact else int(n[i, k]),
                        "p_hat": _fmt(p[i, k]),
                        "log_p_hat": _fmt(lp[i, k]),
                        "se": _fmt(se[i, k]),
                    }
                    if self.exact:
                        row["p_exact"] = _fmt(p[i, k])
                    yield row

    def write_csv(self, path: Path) -> None:
        cols = list(CURVE_COLUMNS) + (["p_exact"] if self.exact else [])
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            w.writerows(self.rows())

    def write_chunks_csv(self, path: Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CHUNK_COLUMNS)
            C = self.chunk_mistakes.shape[0]
            for c in range(C):
                for s, name in ((G, "g"), (B, "b")):
                    for i in range(self.n):
                        for k in range(self.T):
                            w.writerow([c, name, self.labels[i], k + 1,
                                        int(self.chunk_mistakes[c, s, i, k]),
                                        int(self.chunk_trials[c, s])])


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return repr(float(x))


def read_curve_csv(path: Path, chunks_path: Path | None = None) -> MistakeCurve:
    """Inverse of :meth:`MistakeCurve.write_csv` (plus the optional chunk table)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} holds no rows")
    exact = "p_exact" in rows[0]
    labels: list[str] = []
    for r in rows:
        if r["agent"] not in labels:
            labels.append(r["agent"])
    T = max(int(r["t"]) for r in rows)
    n = len(labels)
    idx = {a: i for i, a in enumerate(labels)}
    if exact:
        log_p = np.full((2, n, T), np.nan)
        for r in rows:
            if r["state_conditioning"] in _STATE_INDEX:
                log_p[_STATE_INDEX[r["state_conditioning"]], idx[r["agent"]], int(r["t"]) - 1] = float(r["log_p_hat"])
        return MistakeCurve("exact_forward", n, T, log_p=log_p, labels=labels)
    mistakes = np.zeros((2, n, T), dtype=np.int64)
    trials = np.zeros(2, dtype=np.int64)
    for r in rows:
        s = r["state_conditioning"]
        if s in _STATE_INDEX:
            mistakes[_STATE_INDEX[s], idx[r["agent"]], int(r["t"]) - 1] = int(r["mistakes"])
            trials[_STATE_INDEX[s]] = int(r["trials"])
    chunk_m = chunk_t = None
    if chunks_path is not None and Path(chunks_path).exists():
        with open(chunks_path, newline="") as fh:
            crows = list(csv.DictReader(fh))
        C = max(int(r["chunk"]) for r in crows) + 1
        chunk_m = np.zeros((C, 2, n, T), dtype=np.int64)
        chunk_t = np.zeros((C, 2), dtype=np.int64)
        for r in crows:
            s = _STATE_INDEX[r["state"]]
            c = int(r["chunk"])
            chunk_m[c, s, idx[r["agent"]], int(r["t"]) - 1] = int(r["mistakes"])
            chunk_t[c, s] = int(r["trials"])
    else:
        chunk_m = mistakes[None]
        chunk_t = trials[None]
    return MistakeCurve("monte_carlo", n, T, mistakes, trials, chunk_m, chunk_t, labels=labels)
