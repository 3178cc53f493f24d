"""Run a configured experiment and write its artifact bundle."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, dump_config
from .curves import MistakeCurve
from .dynamics import MonteCarloResult, check_imitation, run_exact_forward, run_monte_carlo
from .errors import ConfigError, InvariantViolation
from .inference import resolve_engine
from .rates import RateEstimate, compare_to_bounds, estimate_rate, estimate_rates, write_rates_csv
from .theory import crossover_n, rate_bounds

log = logging.getLogger(__name__)

FILES = {
    "config": "config.json",
    "hash": "config.sha256",
    "curve": "curve.csv",
    "chunks": "chunks.csv",
    "rates": "rates.csv",
    "verdict": "verdict.json",
    "summary": "summary.jsonl",
    "decay": "series_neg_log_p.csv",
    "social": "series_social_paths.csv",
    "violations": "violations.json",
}


@dataclass
class ExperimentResult:
    curve: MistakeCurve
    estimates: list[RateEstimate]
    verdict: dict
    out: Path
    mc: MonteCarloResult | None = None


def bounds_report(cfg: ExperimentConfig) -> dict:
    model = cfg.model
    b = rate_bounds(model)
    n = cfg["network"]["n"]
    out = {"r_a": b.r_a, "M": b.M, "public_benchmark": b.public_benchmark(n), "n": n}
    try:
        out["crossover_n"] = crossover_n(model)
    except ConfigError:
        out["crossover_n"] = None
    return out


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n")


def _rates(cfg: ExperimentConfig, curve: MistakeCurve, net) -> tuple[list[RateEstimate], dict]:
    rc = cfg["rates"]
    kw = {"method": rc["method"], "floor": rc["floor"], "n_boot": rc["bootstrap"], "seed": cfg["seed"]}
    window = tuple(rc["window"]) if rc["window"] else None
    info: dict = {}
    try:
        estimates = estimate_rates(curve, window=window, shared_window=net.is_complete(), **kw)
    except ConfigError as exc:
        return [], {"error": str(exc)}
    for name, agents in rc["pools"].items():
        pooled = curve.pool(agents, label=name)
        try:
            e = estimate_rate(pooled, 0, window=window, **kw)
            info[name] = e.to_dict()
        except ConfigError as exc:
            info[name] = {"error": str(exc)}
    return estimates, info


def run_experiment(cfg: ExperimentConfig, out: str | Path | None = None, workers: int | None = 1,
                   collect_violations: bool | None = None) -> ExperimentResult:
    """Run the configured Monte Carlo or exact experiment and write all outputs under ``out``."""
    out = Path(out or cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / FILES["config"])
    (out / FILES["hash"]).write_text(cfg.hash + "\n")
    model, net, T = cfg.model, cfg.network, cfg["T"]
    engine = resolve_engine(cfg["engine"], model, net)
    collect = cfg["collect_violations"] if collect_violations is None else collect_violations
    mc = None
    if cfg["mode"] == "monte_carlo":
        kw = {} if cfg["budget"] is None else {"budget": cfg["budget"]}
        try:
            mc = run_monte_carlo(model, net, T, cfg["trials"], cfg["seed"], engine, workers=workers,
                                 chunk_size=cfg["chunk_size"], check_invariants=cfg["check_invariants"],
                                 collect_violations=collect, sample_paths=cfg["sample_paths"], **kw)
        except InvariantViolation as exc:
            if exc.report is not None:
                write_json(out / FILES["violations"], exc.report.to_dict())
            raise
        curve = mc.curve
        curve.write_chunks_csv(out / FILES["chunks"])
        if mc.report.violation_count:
            write_json(out / FILES["violations"], mc.report.to_dict())
    else:
        curve = run_exact_forward(model, net, T, engine, budget=cfg["budget"])
    curve.write_csv(out / FILES["curve"])

    estimates, pools = _rates(cfg, curve, net)
    bounds = rate_bounds(model)
    verdict: dict = {"bounds": bounds_report(cfg), "engine": engine, "mode": cfg["mode"]}
    if estimates:
        write_rates_csv(estimates, out / FILES["rates"])
        verdict["rates"] = compare_to_bounds(estimates, bounds, net)
    else:
        verdict["rates"] = {"error": pools.pop("error", "no usable window")}
    verdict["pools"] = pools
    verdict["imitation"] = check_imitation(curve, net, 0.0).to_dict()
    if mc is not None:
        verdict["invariants"] = mc.report.to_dict()
    write_json(out / FILES["verdict"], verdict)

    _write_decay_series(curve, out / FILES["decay"])
    if mc is not None and mc.social_paths:
        _write_social_series(mc.social_paths, out / FILES["social"])
    summary = {
        "config_hash": cfg.hash, "name": cfg["name"], "seed": cfg["seed"], "engine": engine,
        "mode": cfg["mode"], "trials": cfg["trials"] if mc is not None else None,
        "invariants": mc.report.status if mc is not None else "exact",
        "imitation": verdict["imitation"]["status"],
        "bound_check": verdict["rates"].get("bound_check"),
    }
    with open(out / FILES["summary"], "a") as fh:
        fh.write(json.dumps(_json_safe(summary), sort_keys=True) + "\n")
    return ExperimentResult(curve, estimates, verdict, out, mc)


def _write_decay_series(curve: MistakeCurve, path: Path) -> None:
    lp = curve.log_p_hat()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["agent", "t", "neg_log_p"])
        for i in range(curve.n):
            for k in range(curve.T):
                v = -lp[i, k]
                w.writerow([curve.labels[i], k + 1, repr(float(v)) if math.isfinite(v) else "inf"])


def _write_social_series(paths: dict, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state", "path", "agent", "t", "S_over_t"])
        for state in sorted(paths):
            arr = paths[state]
            for p in range(arr.shape[0]):
                for i in range(arr.shape[1]):
                    for k in range(arr.shape[2]):
                        w.writerow([state, p, i, k + 1, repr(float(arr[p, i, k]))])
