"""Monte Carlo and exact-forward experiments over the inference engines.

Monte Carlo trials are split into fixed-size chunks.  Chunk ``c`` draws its
states and signals from ``SeedSequence(seed, spawn_key=(c,))``, so results do
not depend on how chunks are distributed over worker processes; per-chunk
integer counts are merged in chunk order.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curves import MistakeCurve
from .errors import ConfigError, InvariantViolation
from .inference import make_engine, resolve_engine
from .inference.core import TIE_ACTION, TIE_TOL, Beliefs, myopic_actions
from .inference.generic import DEFAULT_BUDGET, GenericEngine
from .network import Network
from .signals import B, G, SignalModel, compute_M, draw_signals

log = logging.getLogger(__name__)

DEFAULT_CHUNK = 20_000
PRIVATE_BOUND_SLACK = 1e-9
DECOMP_TOL = 1e-9
MAX_RECORDED_VIOLATIONS = 20
SE_MULTIPLIER = 4.0
IMITATION_RTOL = 1e-9
THREADS_ENV = "NETLEARN_THREADS"


@dataclass
class TrajectoryRecord:
    """One simulated run: state, signals, actions and beliefs per (agent, period)."""

    theta: int
    signals: np.ndarray  # (n, T) signal indices
    actions: np.ndarray  # (n, T)
    L: np.ndarray
    S: np.ndarray
    P: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-np.clip(self.L, -700, 700)))

    @property
    def tied(self) -> np.ndarray:
        return np.abs(self.L) < TIE_TOL

    @classmethod
    def from_beliefs(cls, theta: int, signals: np.ndarray, beliefs: Beliefs, b: int = 0) -> "TrajectoryRecord":
        return cls(int(theta), np.asarray(signals), beliefs.actions[b].copy(),
                   beliefs.L[b].copy(), beliefs.S[b].copy(), beliefs.P[b].copy())

    def to_dict(self) -> dict:
        return {
            "theta": "g" if self.theta == G else "b",
            "signals": self.signals.tolist(),
            "actions": self.actions.tolist(),
            "L": self.L.tolist(),
            "S": self.S.tolist(),
            "P": self.P.tolist(),
            "tied": self.tied.tolist(),
        }


@dataclass
class InvariantReport:
    """Outcome of the per-trajectory belief invariant checks."""

    checked: int = 0
    violation_count: int = 0
    tied_actions: int = 0
    max_P_over_Mt: float = 0.0
    max_decomposition_error: float = 0.0
    violations: list[dict] = field(default_factory=list)
    enabled: bool = True

    @property
    def ok(self) -> bool:
        return self.violation_count == 0

    @property
    def status(self) -> str:
        if not self.enabled:
            return "skipped"
        return "pass" if self.ok else "fail"

    def merge(self, other: "InvariantReport") -> None:
        self.checked += other.checked
        self.violation_count += other.violation_count
        self.tied_actions += other.tied_actions
        self.max_P_over_Mt = max(self.max_P_over_Mt, other.max_P_over_Mt)
        self.max_decomposition_error = max(self.max_decomposition_error, other.max_decomposition_error)
        room = MAX_RECORDED_VIOLATIONS - len(self.violations)
        self.violations.extend(other.violations[:max(room, 0)])

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "checked_trajectories": self.checked,
            "violations": self.violation_count,
            "tied_actions": self.tied_actions,
            "max_abs_P_over_Mt": self.max_P_over_Mt,
            "max_decomposition_error": self.max_decomposition_error,
            "recorded": self.violations,
        }


@dataclass
class MonteCarloResult:
    curve: MistakeCurve
    report: InvariantReport
    engine: str
    # S_t / t sample paths per conditioning state: arrays of shape (paths, n, T)
    social_paths: dict[str, np.ndarray]


@dataclass
class _Job:
    model: SignalModel
    net: Network
    T: int
    engine: str
    seed: int
    chunk_size: int
    trials: int
    check: bool
    collect: bool
    paths: int
    tie_action: int
    budget: int


_ENGINE_CACHE: dict = {}


def _engine_for(job: _Job):
    key = (id(job.model), id(job.net), job.T, job.engine, job.tie_action)
    eng = _ENGINE_CACHE.get(key)
    if eng is None:
        _ENGINE_CACHE.clear()
        kw = {"tie_action": job.tie_action}
        if job.engine == "generic":
            kw["budget"] = job.budget
        eng = make_engine(job.engine, job.model, job.net, job.T, **kw)
        _ENGINE_CACHE[key] = eng
    return eng


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Generator for one chunk of trials (documented seed-splitting rule)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))


def draw_chunk(job: _Job, chunk: int) -> tuple[np.ndarray, np.ndarray]:
    """States and signals for one chunk, ordered with all b-trials first."""
    size = min(job.chunk_size, job.trials - chunk * job.chunk_size)
    rng = chunk_rng(job.seed, chunk)
    thetas = rng.integers(0, 2, size=size).astype(np.int8)
    signals = draw_signals(job.model, thetas, job.net.n, job.T, rng)
    order = np.argsort(thetas, kind="stable")
    return thetas[order], signals[order]


def _period_stream(eng, signals: np.ndarray, beliefs: bool):
    """Yield (t, actions, L, S, P) for a batch, whatever the engine."""
    if isinstance(eng, GenericEngine):
        res = eng.run(signals)
        for t in range(1, eng.T + 1):
            k = t - 1
            if beliefs:
                yield t, res.actions[:, :, k], res.L[:, :, k], res.S[:, :, k], res.P[:, :, k]
            else:
                yield t, res.actions[:, :, k], None, None, None
    else:
        yield from eng.iterate(signals, beliefs=beliefs)


def _simulate_chunk(job: _Job, chunk: int):
    eng = _engine_for(job)
    thetas, signals = draw_chunk(job, chunk)
    n, T = job.net.n, job.T
    nb = int(np.count_nonzero(thetas == B))
    mistakes = np.zeros((2, n, T), dtype=np.int64)
    report = InvariantReport(enabled=job.check)
    M = compute_M(job.model)
    bad = np.zeros(len(thetas), dtype=bool) if job.check else None
    for t, a, L, S, P in _period_stream(eng, signals, job.check):
        k = t - 1
        # b-trials err by playing g, g-trials err by playing b
        mistakes[B, :, k] = np.count_nonzero(a[:nb], axis=0)
        mistakes[G, :, k] = (len(thetas) - nb) - np.count_nonzero(a[nb:], axis=0)
        if job.check:
            absP = np.abs(P)
            dec = np.abs(L - S - P)
            wrong_action = a != myopic_actions(L, job.tie_action)
            viol = (absP > M * t + PRIVATE_BOUND_SLACK) | (dec > DECOMP_TOL) | wrong_action
            if M > 0:
                report.max_P_over_Mt = max(report.max_P_over_Mt, float(absP.max()) / (M * t))
            report.max_decomposition_error = max(report.max_decomposition_error, float(dec.max()))
            report.tied_actions += int(np.count_nonzero(np.abs(L) < TIE_TOL))
            rows = viol.any(axis=1)
            if rows.any():
                bad |= rows
                if not job.collect:
                    break
    if job.check:
        report.checked = len(thetas)
        if bad.any():
            idx = np.flatnonzero(bad)
            report.violation_count = len(idx)
            for b in idx[:MAX_RECORDED_VIOLATIONS]:
                report.violations.append(_violation_record(eng, job, chunk, int(b), thetas[b], signals[b], M))
    paths = _social_paths(eng, job, thetas, signals) if chunk == 0 and job.paths > 0 else None
    trials = np.array([nb, len(thetas) - nb], dtype=np.int64)
    return mistakes, trials, report, paths


def _violation_record(eng, job: _Job, chunk: int, b: int, theta: int, signals: np.ndarray, M: float) -> dict:
    bel = eng.run(signals[None])
    rec = TrajectoryRecord.from_beliefs(theta, signals, bel)
    ts = np.arange(1, job.T + 1)
    kinds = []
    if np.any(np.abs(rec.P) > M * ts + PRIVATE_BOUND_SLACK):
        kinds.append("private_likelihood_bound")
    if np.any(np.abs(rec.L - rec.S - rec.P) > DECOMP_TOL):
        kinds.append("decomposition")
    if np.any(rec.actions != myopic_actions(rec.L, job.tie_action)):
        kinds.append("non_myopic_action")
    return {"chunk": chunk, "trial_in_chunk": b, "kinds": kinds, "trajectory": rec.to_dict()}


def _social_paths(eng, job: _Job, thetas: np.ndarray, signals: np.ndarray) -> dict[str, np.ndarray]:
    ts = np.arange(1, job.T + 1)
    out = {}
    for th, name in ((G, "g"), (B, "b")):
        idx = np.flatnonzero(thetas == th)[: job.paths]
        if len(idx) == 0:
            out[name] = np.zeros((0, job.net.n, job.T))
            continue
        out[name] = eng.run(signals[idx]).S / ts
    return out


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    return os.cpu_count() or 1


def run_monte_carlo(
    model: SignalModel,
    net: Network,
    T: int,
    trials: int,
    seed: int,
    engine: str = "auto",
    workers: int | None = 1,
    chunk_size: int = DEFAULT_CHUNK,
    check_invariants: bool = True,
    collect_violations: bool = False,
    sample_paths: int = 4,
    tie_action: int = TIE_ACTION,
    budget: int = DEFAULT_BUDGET,
) -> MonteCarloResult:
    """Simulate myopic dynamics and count mistakes per state, agent and period.

    With ``check_invariants`` every trajectory is checked for the private
    likelihood bound ``|P| <= M t``, the decomposition ``L = S + P`` and
    myopic play; a violation raises :class:`InvariantViolation` carrying the
    report unless ``collect_violations`` is set.  Results are identical for
    any ``workers`` given the same seed, trial count and chunk size.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if T < 1:
        raise ConfigError("T must be >= 1")
    if chunk_size < 1:
        raise ConfigError("chunk_size must be >= 1")
    name = resolve_engine(engine, model, net)
    job = _Job(model, net, T, name, int(seed), chunk_size, trials, check_invariants,
               collect_violations, sample_paths, tie_action, budget)
    n_chunks = math.ceil(trials / chunk_size)
    workers = default_workers() if workers is None else max(1, int(workers))
    workers = min(workers, n_chunks)

    mistakes = np.zeros((2, net.n, T), dtype=np.int64)
    chunk_m = np.zeros((n_chunks, 2, net.n, T), dtype=np.int64)
    chunk_t = np.zeros((n_chunks, 2), dtype=np.int64)
    report = InvariantReport(enabled=check_invariants)
    paths = None

    def absorb(c, result):
        nonlocal paths
        m, tr, rep, pth = result
        chunk_m[c] = m
        chunk_t[c] = tr
        report.merge(rep)
        if pth is not None:
            paths = pth
        if not rep.ok and not collect_violations:
            raise InvariantViolation(
                f"belief invariant violated in chunk {c} ({rep.violation_count} trajectories)", report)

    if workers == 1:
        for c in range(n_chunks):
            absorb(c, _simulate_chunk(job, c))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for c, result in enumerate(pool.map(_simulate_chunk, [job] * n_chunks, range(n_chunks))):
                absorb(c, result)
    mistakes[:] = chunk_m.sum(axis=0)
    curve = MistakeCurve("monte_carlo", net.n, T, mistakes, chunk_t.sum(axis=0), chunk_m, chunk_t)
    log.info("monte carlo: %d trials, engine %s, invariants %s", trials, name, report.status)
    return MonteCarloResult(curve, report, name, paths or {})


def run_exact_forward(model: SignalModel, net: Network, T: int, engine: str = "auto",
                      budget: int | None = None, tie_action: int = TIE_ACTION) -> MistakeCurve:
    """Exact mistake probabilities; exceeding the budget raises, never truncates."""
    if T < 1:
        raise ConfigError("T must be >= 1")
    name = resolve_engine(engine, model, net)
    if name == "generic":
        eng = GenericEngine(model, net, T, budget=budget or DEFAULT_BUDGET, tie_action=tie_action)
        for t in range(1, T + 1):
            mass = eng.total_log_mass(t)
            if max(abs(m) for m in mass) > 1e-10:
                raise InvariantViolation(f"enumeration weights do not sum to one at t={t}: {mass}")
        return eng.exact_curve()
    eng = make_engine(name, model, net, T, tie_action=tie_action)
    return eng.exact_curve(node_budget=budget)


@dataclass
class ImitationReport:
    delta: float
    checked: int
    violations: list[dict]
    mode: str

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"delta": self.delta, "mode": self.mode, "checked": self.checked,
                "violations": self.violations, "status": "pass" if self.ok else "fail"}


def check_imitation(curve: MistakeCurve, net: Network, delta: float = 0.0) -> ImitationReport:
    """Check P[a_t^i != Theta] <= P[a_{t-1}^j != Theta] / (1 - delta) for every j in N_i.

    Exact curves are compared with a relative tolerance of 1e-9; Monte Carlo
    curves get a slack of four joint standard errors.
    """
    if not 0.0 <= delta < 1.0:
        raise ConfigError("delta must lie in [0, 1)")
    if curve.n != net.n:
        raise ConfigError(f"curve has {curve.n} agents but the network has {net.n}")
    p = curve.p_hat()
    se = curve.se()
    scale = 1.0 / (1.0 - delta)
    violations = []
    checked = 0
    for i in range(net.n):
        for j in net.neighbors[i]:
            for t in range(2, curve.T + 1):
                lhs = p[i, t - 1]
                rhs = scale * p[j, t - 2]
                if curve.exact:
                    slack = IMITATION_RTOL * rhs
                else:
                    slack = SE_MULTIPLIER * math.hypot(se[i, t - 1], scale * se[j, t - 2])
                checked += 1
                if lhs > rhs + slack:
                    violations.append({"observer": i, "observed": j, "t": t,
                                       "p_observer": float(lhs), "bound": float(rhs), "slack": float(slack)})
    return ImitationReport(delta, checked, violations, curve.mode)
