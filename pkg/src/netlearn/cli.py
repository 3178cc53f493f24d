"""Command-line entry point: ``netlearn {bounds,run,rates,micro,verify}``.

Exit codes: 0 success, 2 configuration error, 3 resource budget exceeded,
4 invariant violation (or a failed verification).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PRESETS, ExperimentConfig, load_config, preset
from .curves import read_curve_csv
from .dynamics import THREADS_ENV, default_workers
from .errors import ConfigError, InvariantViolation, ResourceError
from .experiment import FILES, bounds_report, run_experiment, write_json
from .rates import compare_to_bounds, estimate_rates, write_rates_csv
from .theory import rate_bounds

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_INVARIANT = 0, 2, 3, 4

log = logging.getLogger("netlearn")


def _load(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("a --config file or a --preset is required")
    return cfg.with_overrides(seed=args.seed, trials=getattr(args, "trials", None))


def _workers(args) -> int:
    return args.threads if args.threads else default_workers()


def cmd_bounds(args) -> int:
    cfg = _load(args)
    rep = bounds_report(cfg)
    print(f"r_a = {rep['r_a']:.5f} nats/period")
    print(f"M = {rep['M']:.5f} nats/period")
    print(f"crossover n = {rep['crossover_n']}")
    print(f"public benchmark n*r_a (n={rep['n']}) = {rep['public_benchmark']:.5f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "bounds.json", rep)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg["output"])
    print(f"config hash {cfg.hash}")
    res = run_experiment(cfg, out, workers=_workers(args),
                         collect_violations=True if args.collect_violations else None)
    v = res.verdict
    b = v["bounds"]
    print(f"engine {v['engine']}; r_a = {b['r_a']:.5f}, M = {b['M']:.5f}, crossover n = {b['crossover_n']}")
    for e in res.estimates:
        print(f"agent {e.agent}: rate {e.rate:.4f} +- {e.se:.4f} on [{e.t_min}, {e.t_max}]")
    for name, info in v["pools"].items():
        if "rate" in info:
            print(f"pool {name}: rate {info['rate']:.4f} +- {info['se']:.4f} on [{info['t_min']}, {info['t_max']}]")
    if "bound_check" in v["rates"]:
        print(f"bound check: {v['rates']['bound_check']}; equal rates: {v['rates']['equal_rates']}")
    if "invariants" in v:
        print(f"invariants: {v['invariants']['status']}")
    print(f"outputs written to {out}")
    if "invariants" in v and v["invariants"]["violations"]:
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_rates(args) -> int:
    cfg = _load(args)
    out = Path(args.out or cfg["output"])
    curve_path = Path(args.curve) if args.curve else out / FILES["curve"]
    chunks = Path(args.chunks) if args.chunks else curve_path.with_name(FILES["chunks"])
    curve = read_curve_csv(curve_path, chunks)
    net = cfg.network
    if curve.n != net.n:
        raise ConfigError(f"curve has {curve.n} agents, config network has {net.n}")
    rc = cfg["rates"]
    window = tuple(rc["window"]) if rc["window"] else None
    est = estimate_rates(curve, window=window, shared_window=net.is_complete(), method=rc["method"],
                         floor=rc["floor"], n_boot=rc["bootstrap"], seed=cfg["seed"])
    verdict = compare_to_bounds(est, rate_bounds(cfg.model), net)
    out.mkdir(parents=True, exist_ok=True)
    write_rates_csv(est, out / FILES["rates"])
    write_json(out / FILES["verdict"], {"rates": verdict})
    for e in est:
        print(f"agent {e.agent}: rate {e.rate:.4f} +- {e.se:.4f} on [{e.t_min}, {e.t_max}]")
    print(f"bound check: {verdict['bound_check']}")
    return EXIT_OK


def cmd_micro(args) -> int:
    from .micro import (MicroGame, best_deviation, check_deviation_bound, check_lemma1_threshold,
                        expected_utility, myopic_profile)
    from .network import make_topology
    from .signals import make_symmetric_binary

    game = MicroGame(make_symmetric_binary(args.p), make_topology(args.network, args.n), args.T, args.delta)
    prof = myopic_profile(game)
    devs = [best_deviation(game, prof, i, args.mode) for i in range(game.n)]
    certified = all(d.gain <= 1e-12 for d in devs) and args.mode != "one-shot"
    threshold = check_lemma1_threshold(game, prof, certified=certified)
    bound = check_deviation_bound(game, prof)
    util = expected_utility(game, prof)
    report = {
        "game": {"n": game.n, "network": args.network, "T": game.T, "p": args.p, "delta": game.delta},
        "utility": util.utility.tolist(),
        "accuracy": util.accuracy.tolist(),
        "deviations": [d.to_dict() for d in devs],
        "certified_equilibrium": certified,
        "threshold": threshold.to_dict(),
        "deviation_bound": bound.to_dict(),
    }
    for d in devs:
        note = " (necessary condition only)" if d.mode == "one-shot" else ""
        print(f"agent {d.agent}: best deviation gain {d.gain:.3e}{note}")
    print(f"threshold -log(1-delta) = {threshold.threshold:.4f}; statuses {threshold.counts()}")
    print(f"imitation bound: {'pass' if bound.ok else 'fail'}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "micro.json", report)
    return EXIT_OK if not threshold.violations and bound.ok else EXIT_INVARIANT


def cmd_verify(args) -> int:
    from .verify import CHECKS

    selected = args.only or sorted(CHECKS)
    results = []
    for k in selected:
        r = CHECKS[k]()
        print(r.line(), flush=True)
        results.append(r)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "verify.json", [r.to_dict() for r in results])
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netlearn", description="Bayesian social learning on networks")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, trials=True):
        sp.add_argument("--config", help="YAML or JSON experiment config")
        sp.add_argument("--preset", choices=sorted(PRESETS))
        sp.add_argument("--seed", type=int)
        if trials:
            sp.add_argument("--trials", type=int)
        sp.add_argument("--threads", type=int, help=f"worker processes (default: ${THREADS_ENV} or CPU count)")
        sp.add_argument("--out", help="output directory")

    common(sub.add_parser("bounds", help="print r_a, M and the crossover size"), trials=False)
    sp = sub.add_parser("run", help="run an experiment and write its outputs")
    common(sp)
    sp.add_argument("--collect-violations", action="store_true",
                    help="record invariant violations and continue (debugging)")
    sp = sub.add_parser("rates", help="estimate rates from a written mistake curve")
    common(sp, trials=False)
    sp.add_argument("--curve", help="curve CSV (default: <out>/curve.csv)")
    sp.add_argument("--chunks", help="chunk CSV for the bootstrap (default: next to the curve)")
    sp = sub.add_parser("micro", help="strategic checks in a tiny game")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--network", default="complete", choices=["complete", "star", "ring", "autarky"])
    sp.add_argument("--T", type=int, default=2)
    sp.add_argument("--p", type=float, default=0.9)
    sp.add_argument("--delta", type=float, default=0.0)
    sp.add_argument("--mode", default="exhaustive", choices=["exhaustive", "backward", "one-shot"])
    sp.add_argument("--out")
    sp = sub.add_parser("verify", help="run the acceptance checks")
    sp.add_argument("--only", type=int, nargs="+", choices=range(1, 10), metavar="N")
    sp.add_argument("--out")
    return p


COMMANDS = {"bounds": cmd_bounds, "run": cmd_run, "rates": cmd_rates, "micro": cmd_micro, "verify": cmd_verify}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
