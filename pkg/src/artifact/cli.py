"""Command-line entry point: ``run``, ``schedule`` and ``deviation``.

Exit codes: 0 when every verdict passes, 1 when a verdict fails, 2 on usage
or configuration errors.
"""

from __future__ import annotations

import argparse
import sys

from . import bandit, harness, pca, schedules

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _spectrum(args) -> pca.Spectrum:
    if args.spectrum is None:
        return pca.Spectrum.default()
    return pca.Spectrum.parse(args.spectrum, args.k)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="artifact", description="Monte Carlo checks of high-probability bounds.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate trials and test a bound")
    run.add_argument("--dynamic", required=True, choices=harness.DYNAMICS)
    run.add_argument("--guarantee", default="uniform", choices=("last", "uniform"))
    run.add_argument("--trials", type=int, default=100)
    run.add_argument("--horizon", type=int, default=None)
    run.add_argument("--delta", type=float, default=0.1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", default=None, help="CSV path prefix")
    run.add_argument("--x0", type=float, default=None, help="start value (toy, pca)")
    run.add_argument("--dim", type=int, default=None, help="dimension (sgd, bandit)")
    run.add_argument("--lam", type=float, default=None, help="strong convexity (sgd) or regulariser (bandit)")
    run.add_argument("--G", type=float, default=None, help="gradient bound (sgd)")
    run.add_argument("--R", type=float, default=None, help="domain radius (sgd)")
    run.add_argument("--noise-radius", type=float, default=None, help="oracle noise radius (sgd)")
    run.add_argument("--spectrum", default=None, help="comma-separated eigenvalues (pca)")
    run.add_argument("--k", type=int, default=2, help="subspace dimension (pca)")
    run.add_argument("--intervals", type=int, default=2, help="plan intervals to simulate (pca)")
    run.add_argument("--actions", type=int, default=None, help="actions per round (bandit)")
    run.add_argument("--L", type=float, default=None, help="action norm bound (bandit)")
    run.add_argument("--L-star", type=float, default=None, help="parameter norm bound (bandit)")

    sch = sub.add_parser("schedule", help="build and verify an interval plan")
    sch.add_argument("--dynamic", required=True, choices=("sgd", "pca"))
    sch.add_argument("--delta", type=float, default=0.1)
    sch.add_argument("--intervals", type=int, default=20)
    sch.add_argument("--out", default=None, help="CSV file for the plan")
    sch.add_argument("--G", type=float, default=1.0)
    sch.add_argument("--lam", type=float, default=1.0)
    sch.add_argument("--spectrum", default=None)
    sch.add_argument("--k", type=int, default=2)
    sch.add_argument("--variant", default="proof", choices=("statement", "proof"), help="pca deviation form")

    dev = sub.add_parser("deviation", help="evaluate a closed-form interval deviation")
    dev.add_argument("--dynamic", required=True, choices=("sgd", "pca", "bandit"))
    dev.add_argument("--T0", type=int, default=None)
    dev.add_argument("--T1", type=int, required=True)
    dev.add_argument("--Lambda", type=float, required=True)
    dev.add_argument("--delta-p", type=float, required=True)
    dev.add_argument("--G", type=float, default=1.0)
    dev.add_argument("--lam", type=float, default=1.0)
    dev.add_argument("--gamma", type=float, default=None)
    dev.add_argument("--lambda-top", type=float, default=None)
    dev.add_argument("--gap", type=float, default=None)
    dev.add_argument("--variant", default="statement", choices=("statement", "proof"))
    dev.add_argument("--dim", type=int, default=4)
    dev.add_argument("--L", type=float, default=1.0)
    dev.add_argument("--eta", type=float, default=None)
    return parser


def _run_config(args) -> dict:
    cfg = {}
    if args.dynamic in ("toy", "pca") and args.x0 is not None:
        cfg["x0"] = args.x0
    if args.dynamic == "sgd":
        for key, val in (("d", args.dim), ("lam", args.lam), ("G", args.G), ("R", args.R), ("c", args.noise_radius)):
            if val is not None:
                cfg[key] = val
    if args.dynamic == "pca":
        cfg["spectrum"] = _spectrum(args)
        cfg["intervals"] = args.intervals
    if args.dynamic == "bandit":
        for key, val in (("d", args.dim), ("lam", args.lam), ("K", args.actions), ("L", args.L), ("L_star", args.L_star)):
            if val is not None:
                cfg[key] = val
    return cfg


def cmd_run(args) -> int:
    spec = harness.ExperimentSpec(
        dynamic=args.dynamic,
        guarantee=args.guarantee,
        trials=args.trials,
        horizon=args.horizon,
        delta=args.delta,
        base_seed=args.seed,
        config=_run_config(args),
        workers=args.workers,
    )
    report = harness.run_experiment(spec)
    print(report.summary())
    if args.out:
        for path in harness.emit_csv(report, args.out):
            print(f"wrote {path}")
    return EXIT_OK if report.verdict else EXIT_FAIL


def cmd_schedule(args) -> int:
    if args.dynamic == "sgd":
        plan = schedules.sgd_uniform_plan(args.G, args.lam, args.delta, args.intervals)
        checks = schedules.verify_sgd_plan(plan)
        flags = {}
    else:
        s = _spectrum(args)
        plan = schedules.pca_uniform_plan(s.lambda_top, s.gap, args.delta, args.intervals)
        checks = schedules.verify_pca_plan(plan, variant=args.variant)
        flags = {p["i"]: p for p in schedules.pca_lemma_preconditions(plan)}
    print("i,t_i,a_i,delta_i,Lambda_i,deviation,pullout_margin,improvement_margin,status")
    for c in checks:
        i = c.i
        note = ""
        if i in flags and not (flags[i]["Lambda_ok"] and flags[i]["eta_ok"]):
            note = " (lemma precondition not met: Lambda>1)" if not flags[i]["Lambda_ok"] else " (eta>1/4)"
        status = "pass" if c.passed else "FAIL"
        print(
            f"{i},{plan.boundaries[i]},{plan.levels[i]:.6g},{plan.confidences[i]:.6g},{plan.thresholds[i]:.6g},"
            f"{c.deviation:.6g},{c.pullout_margin:.6g},{c.improvement_margin:.6g},{status}{note}"
        )
    if args.out:
        plan.to_csv(args.out)
        print(f"wrote {args.out}")
    passed = all(c.passed for c in checks)
    print(f"{sum(c.passed for c in checks)}/{len(checks)} intervals pass")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_deviation(args) -> int:
    if args.dynamic == "sgd":
        if args.T0 is None:
            raise ValueError("--T0 is required for sgd")
        value = schedules.sgd_interval_deviation(args.G, args.lam, args.T0, args.T1, args.Lambda, args.delta_p)
    elif args.dynamic == "pca":
        if None in (args.T0, args.gamma, args.lambda_top, args.gap):
            raise ValueError("--T0, --gamma, --lambda-top and --gap are required for pca")
        value = schedules.pca_interval_deviation(
            args.gamma, args.lambda_top, args.gap, args.T0, args.T1, args.Lambda, args.delta_p, variant=args.variant
        )
    else:
        cfg = bandit.BanditConfig(d=args.dim, lam=args.lam, L=args.L, eta=args.eta)
        value = bandit.bandit_deviation(cfg, args.T1, args.Lambda, args.delta_p)
    print(repr(value))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    handlers = {"run": cmd_run, "schedule": cmd_schedule, "deviation": cmd_deviation}
    try:
        return handlers[args.command](args)
    except (ValueError, schedules.ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
