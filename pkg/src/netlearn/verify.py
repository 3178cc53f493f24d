"""Acceptance checks shared by ``netlearn verify`` and the test suite.

Each check returns a :class:`CheckResult`; ``passed`` requires both the
numerical condition and the runtime limit.
"""

from __future__ import annotations

import filecmp
import itertools
import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import from_dict
from .dynamics import check_imitation, run_exact_forward, run_monte_carlo
from .experiment import run_experiment
from .inference import CompleteEngine, GenericEngine, StarEngine
from .micro import (
    GAIN_TOL, MicroGame, StrategyTable, best_deviation, best_response_candidates,
    check_deviation_bound, check_lemma1_threshold, expected_utility, myopic_profile,
)
from .network import make_topology, sink_components
from .rates import compare_to_bounds, estimate_rate, estimate_rates
from .signals import make_symmetric_binary
from .theory import crossover_n, rate_bounds, single_agent_exact_mistakes


@dataclass
class CheckResult:
    number: int
    name: str
    ok: bool
    seconds: float
    limit: float
    detail: dict = field(default_factory=dict)

    @property
    def within_time(self) -> bool:
        return self.seconds < self.limit

    @property
    def passed(self) -> bool:
        return self.ok and self.within_time

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        timing = f"{self.seconds:.1f}s/{self.limit:.0f}s"
        return f"[{tag}] {self.number}. {self.name} ({timing}) {self.summary()}"

    def summary(self) -> str:
        keys = self.detail.get("_summary", [])
        return " ".join(f"{k}={_short(self.detail[k])}" for k in keys)

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.detail.items() if k != "_summary"}
        return {"number": self.number, "name": self.name, "passed": self.passed, "ok": self.ok,
                "seconds": self.seconds, "limit": self.limit, "detail": d}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return v


def _timed(number: int, name: str, limit: float, fn) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail = fn()
    return CheckResult(number, name, bool(ok), time.perf_counter() - t0, limit, detail)


# -- 1 ---------------------------------------------------------------------

def check_constants() -> CheckResult:
    def body():
        m = make_symmetric_binary(0.9)
        b = rate_bounds(m)
        cn = crossover_n(m)
        ok = abs(b.M - 4.39445) <= 1e-4 and abs(b.r_a - 0.51083) <= 1e-4 and cn == 9
        return ok, {"M": b.M, "r_a": b.r_a, "crossover_n": cn, "_summary": ["M", "r_a", "crossover_n"]}
    return _timed(1, "constants for p=0.9", 1.0, body)


# -- 2 ---------------------------------------------------------------------

def check_single_agent_rate() -> CheckResult:
    def body():
        m = make_symmetric_binary(0.9)
        curve = single_agent_exact_mistakes(m, 200)
        est = estimate_rate(curve, 0, window=(50, 200), method="ols_log")
        r_a = rate_bounds(m).r_a
        rel = est.rate / r_a - 1
        return abs(rel) <= 0.02, {"rate": est.rate, "r_a": r_a, "rel_error": rel,
                                  "_summary": ["rate", "r_a", "rel_error"]}
    return _timed(2, "single-agent exact rate on [50,200]", 5.0, body)


# -- 3 ---------------------------------------------------------------------

def all_signal_matrices(n: int, T: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=n * T)), dtype=np.int8).reshape(-1, n, T)


def compare_engines(fast, ref, signals: np.ndarray) -> tuple[bool, float]:
    a = fast.run(signals)
    b = ref.run(signals)
    same = bool(np.array_equal(a.actions, b.actions))
    diff = max(float(np.max(np.abs(getattr(a, f) - getattr(b, f)))) for f in ("L", "S", "P"))
    return same, diff


def check_engine_equivalence(ns=(2, 3), Ts=range(1, 6), ps=(0.6, 0.75, 0.9)) -> CheckResult:
    def body():
        worst = 0.0
        mismatches = []
        cases = 0
        for n, T, p in itertools.product(ns, Ts, ps):
            m = make_symmetric_binary(p)
            sig = all_signal_matrices(n, T)
            for kind, cls in (("complete", CompleteEngine), ("star", StarEngine)):
                net = make_topology(kind, n)
                same, diff = compare_engines(cls(m, net, T), GenericEngine(m, net, T), sig)
                cases += len(sig)
                worst = max(worst, diff)
                if not same or diff > 1e-9:
                    mismatches.append({"kind": kind, "n": n, "T": T, "p": p, "actions_equal": same, "diff": diff})
        return not mismatches, {"signal_matrices": cases, "max_belief_diff": worst, "mismatches": mismatches,
                                "_summary": ["signal_matrices", "max_belief_diff"]}
    return _timed(3, "engine equivalence vs enumeration", 120.0, body)


# -- 4 ---------------------------------------------------------------------

PRIVATE_BOUND_RUNS = (
    ("complete", 5, 0.75, 40, 25_000),
    ("complete", 3, 0.9, 40, 20_000),
    ("complete", 2, 0.6, 40, 10_000),
    ("star", 11, 0.9, 20, 20_000),
    ("star", 4, 0.6, 30, 10_000),
    ("ring", 3, 0.75, 6, 10_000),
    ("ring", 3, 0.6, 5, 5_000),
)


def check_private_bound(runs=PRIVATE_BOUND_RUNS, seed: int = 4) -> CheckResult:
    def body():
        total = violations = 0
        worst = worst_dec = 0.0
        per_run = []
        for kind, n, p, T, trials in runs:
            r = run_monte_carlo(make_symmetric_binary(p), make_topology(kind, n), T, trials, seed,
                                collect_violations=True, sample_paths=0)
            total += r.report.checked
            violations += r.report.violation_count
            worst = max(worst, r.report.max_P_over_Mt)
            worst_dec = max(worst_dec, r.report.max_decomposition_error)
            per_run.append({"network": kind, "n": n, "p": p, "T": T, "engine": r.engine,
                            "trajectories": r.report.checked, "violations": r.report.violation_count})
        ok = violations == 0 and total >= 100_000
        return ok, {"trajectories": total, "violations": violations, "max_abs_P_over_Mt": worst,
                    "max_decomposition_error": worst_dec, "runs": per_run,
                    "_summary": ["trajectories", "violations", "max_abs_P_over_Mt", "max_decomposition_error"]}
    return _timed(4, "private-likelihood bound and decomposition", 300.0, body)


# -- 5 ---------------------------------------------------------------------

def check_imitation_exact(cases=(("complete", 2, 12), ("star", 3, 6)), ps=(0.6, 0.75, 0.9)) -> CheckResult:
    def body():
        checked = 0
        violations = []
        for (kind, n, T), p in itertools.product(cases, ps):
            net = make_topology(kind, n)
            curve = run_exact_forward(make_symmetric_binary(p), net, T)
            rep = check_imitation(curve, net, 0.0)
            checked += rep.checked
            violations += [dict(v, network=kind, p=p) for v in rep.violations]
        return not violations, {"edge_periods": checked, "violations": len(violations), "list": violations,
                                "_summary": ["edge_periods", "violations"]}
    return _timed(5, "imitation bound on exact curves (delta=0)", 120.0, body)


# -- 6 ---------------------------------------------------------------------

RATE_BOUND_RUNS = ((2, 20), (3, 16), (4, 16), (5, 16))


def check_rate_bound(trials: int = 10_000_000, runs=RATE_BOUND_RUNS, slow_trials: int = 1_000_000,
                        seed: int = 6, workers: int = 1) -> CheckResult:
    def body():
        rows = []
        ok = True
        for n, T in runs:
            m = make_symmetric_binary(0.9)
            net = make_topology("complete", n)
            r = run_monte_carlo(m, net, T, trials, seed + n, workers=workers, sample_paths=0)
            est = estimate_rates(r.curve, seed=seed)
            v = compare_to_bounds(est, rate_bounds(m), net)
            good = v["all_within_M"] and v["equal_rates"] and r.report.ok
            ok &= good
            rows.append({"p": 0.9, "n": n, "trials": trials, "window": [est[0].t_min, est[0].t_max],
                         "rates": [e.rate for e in est], "se": [e.se for e in est],
                         "spread": v["spread"], "spread_joint_se": v["spread_joint_se"],
                         "all_within_M": v["all_within_M"], "equal_rates": v["equal_rates"], "pass": good})
        # non-binding regime: recorded as a consistency property
        m = make_symmetric_binary(0.75)
        net = make_topology("complete", 5)
        r = run_monte_carlo(m, net, 24, slow_trials, seed + 75, workers=workers, sample_paths=0)
        est = estimate_rates(r.curve, seed=seed)
        M = rate_bounds(m).M
        none_over = all(e.rate <= M for e in est)
        ok &= none_over and r.report.ok
        rows.append({"p": 0.75, "n": 5, "trials": slow_trials, "window": [est[0].t_min, est[0].t_max],
                     "rates": [e.rate for e in est], "se": [e.se for e in est], "M": M,
                     "none_exceed_M": none_over})
        max_rate = max(max(r["rates"]) for r in rows)
        spreads = {r["n"]: round(r["spread"] / r["spread_joint_se"], 2) for r in rows if "spread" in r}
        return ok, {"runs": rows, "max_rate": max_rate, "M_p09": rate_bounds(make_symmetric_binary(0.9)).M,
                    "all_within_M": all(r.get("all_within_M", True) for r in rows),
                    "spread_over_joint_se": spreads,
                    "unequal_n": [r["n"] for r in rows if r.get("equal_rates") is False],
                    "_summary": ["max_rate", "M_p09", "all_within_M", "spread_over_joint_se", "unequal_n"]}
    return _timed(6, "rates below M on complete networks", 900.0, body)


# -- 7 ---------------------------------------------------------------------

def check_star(trials: int = 1_000_000, T: int = 20, seed: int = 7, workers: int = 1) -> CheckResult:
    def body():
        n = 11
        m = make_symmetric_binary(0.9)
        net = make_topology("star", n)
        bounds = rate_bounds(m)
        r = run_monte_carlo(m, net, T, trials, seed, workers=workers, sample_paths=0)
        periph = r.curve.pool(range(1, n), label="peripheral")
        pe = estimate_rate(periph, 0, seed=seed)
        rel = pe.rate / bounds.r_a - 1
        # center never does worse than a peripheral, cell by cell
        pc, pp = r.curve.p_hat()[0], periph.p_hat()[0]
        sc, sp = r.curve.se()[0], periph.se()[0]
        mc, mp = r.curve.counts()[0][0], periph.counts()[0][0]
        cells = np.flatnonzero((mc >= 50) | (mp >= 50))
        excess = [(int(k + 1), float(pc[k] - pp[k]), float(4 * math.hypot(sc[k], sp[k]))) for k in cells]
        center_ok = all(d <= s for _, d, s in excess)
        sinks = sorted(sorted(c) for c in sink_components(net))
        sinks_ok = sinks == [[i] for i in range(1, n)]
        est = estimate_rates(r.curve, shared_window=False, seed=seed)
        v = compare_to_bounds(est, bounds, net)
        ok = abs(rel) <= 0.10 and center_ok and sinks_ok and v["min_within_M"] and r.report.ok
        return ok, {"peripheral_rate": pe.rate, "r_a": bounds.r_a, "rel_error": rel,
                    "window": [pe.t_min, pe.t_max], "center_cells": len(excess), "center_ok": center_ok,
                    "sinks_ok": sinks_ok, "min_rate": v["min_rate"], "min_within_M": v["min_within_M"],
                    "center_rate": est[0].rate,
                    "_summary": ["peripheral_rate", "rel_error", "center_ok", "sinks_ok", "min_within_M"]}
    return _timed(7, "star network", 300.0, body)


# -- 8 ---------------------------------------------------------------------

def _own_signal_profile(game: MicroGame) -> list[StrategyTable]:
    """Everyone follows their own signals only (empty tables use the fallback)."""
    return [StrategyTable(i) for i in range(game.n)]


def _random_profile(game: MicroGame, base: list[StrategyTable], rng) -> list[StrategyTable]:
    out = []
    for tb in base:
        acts = {k: int(rng.integers(0, 2)) for k in sorted(tb.actions)}
        out.append(StrategyTable(tb.agent, acts))
    return out


def check_micro_suite(ns=(2, 3), ps=(0.75, 0.9), deltas=(0.0, 0.3, 0.6), random_starts: int = 2,
                      seed: int = 8) -> CheckResult:
    def body():
        rows = []
        ok = True
        for n, p, d in itertools.product(ns, ps, deltas):
            m = make_symmetric_binary(p)
            net = make_topology("complete", n)
            game = MicroGame(m, net, 2, d)
            prof = myopic_profile(game)
            gains = [best_deviation(game, prof, i).gain for i in range(n)]
            row = {"n": n, "p": p, "delta": d, "myopic_gain": max(gains)}
            if d == 0.0:
                row["myopic_gain_ok"] = max(gains) <= GAIN_TOL
                acc = expected_utility(game, prof).accuracy
                exact = run_exact_forward(m, net, 2).accuracy()
                row["utility_vs_exact"] = float(np.max(np.abs(acc - exact)))
                row["utility_ok"] = row["utility_vs_exact"] <= 1e-12
                ok &= row["myopic_gain_ok"] and row["utility_ok"]
            rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n, int(p * 100), int(d * 10))))
            starts = [prof, _own_signal_profile(game)] + [_random_profile(game, prof, rng) for _ in range(random_starts)]
            cands = best_response_candidates(game, starts)
            threshold = [check_lemma1_threshold(game, c, certified=True) for c in cands]
            bound = [check_deviation_bound(game, c) for c in cands]
            row["candidates"] = len(cands)
            row["threshold_violations"] = sum(len(r.violations) for r in threshold)
            row["deviation_bound_violations"] = sum(len(b.violations) for b in bound)
            ok &= row["threshold_violations"] == 0
            rows.append(row)
        worst_gain = max(r["myopic_gain"] for r in rows if r["delta"] == 0.0)
        worst_util = max(r["utility_vs_exact"] for r in rows if r["delta"] == 0.0)
        viol = sum(r["threshold_violations"] for r in rows)
        cands = sum(r["candidates"] for r in rows)
        return ok, {"games": rows, "max_myopic_gain_delta0": worst_gain, "max_utility_diff": worst_util,
                    "certified_candidates": cands, "threshold_violations": viol,
                    "_summary": ["max_myopic_gain_delta0", "max_utility_diff", "certified_candidates",
                                 "threshold_violations"]}
    return _timed(8, "strategic micro-suite", 180.0, body)


# -- 9 ---------------------------------------------------------------------

DETERMINISM_CONFIG = {
    "name": "determinism",
    "signal": {"kind": "symmetric_binary", "p": 0.75},
    "network": {"kind": "complete", "n": 3},
    "T": 12, "trials": 60_000, "seed": 99, "chunk_size": 5_000,
    "rates": {"bootstrap": 200},
}
RESULT_TABLES = ("curve.csv", "chunks.csv", "rates.csv", "verdict.json", "series_neg_log_p.csv",
                 "series_social_paths.csv")


def check_determinism(config: dict | None = None) -> CheckResult:
    def body():
        cfg = from_dict(config or DETERMINISM_CONFIG)
        with tempfile.TemporaryDirectory() as tmp:
            dirs = []
            for tag, workers in (("w1", 1), ("w8", 8), ("w1-again", 1)):
                d = Path(tmp) / tag
                run_experiment(cfg, d, workers=workers)
                dirs.append(d)
            diffs = []
            for name in RESULT_TABLES:
                for d in dirs[1:]:
                    if not filecmp.cmp(dirs[0] / name, d / name, shallow=False):
                        diffs.append(f"{d.name}/{name}")
        return not diffs, {"tables": len(RESULT_TABLES), "differences": diffs, "_summary": ["tables", "differences"]}
    return _timed(9, "determinism across workers", 60.0, body)


CHECKS = {
    1: check_constants,
    2: check_single_agent_rate,
    3: check_engine_equivalence,
    4: check_private_bound,
    5: check_imitation_exact,
    6: check_rate_bound,
    7: check_star,
    8: check_micro_suite,
    9: check_determinism,
}


def run_all(selected=None, **kw) -> list[CheckResult]:
    return [CHECKS[k]() for k in (selected or sorted(CHECKS))]
