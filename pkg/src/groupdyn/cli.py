"""Command-line pipeline.

Every subcommand reads files and/or a seed, writes artifacts under the output
directory, and prints a one-line summary.  Stages are file-mediated so any
single experiment can be replayed in isolation.

Exit codes: 0 ok, 2 usage, 3 input error, 4 numerical failure.
Environment: GROUPDYN_OUT overrides the default output directory,
GROUPDYN_THREADS caps worker threads.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import dataio, verification
from .burst import build_dataset, chronological_split, detect_bursts, evaluate, train_logreg, window_sweep
from .errors import (
    ConfigError,
    DataFormatError,
    EstimationError,
    FitError,
    GroupDynError,
    NumericalError,
    OverflowTickError,
    TrainingError,
)
from .estimators import (
    ObservedActions,
    estimate_factors,
    estimate_individual_model,
    meso_to_macro,
    micro_to_meso,
    predict_log_counts,
    non_radical_exponent,
)
from .fitting import LognormalFit, lognormal_mle, powerlaw_fit, powerlaw_pvalue, qq_points
from .simulator import FactorPair, SimulationConfig, simulate_ensemble

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4


def _out_dir(args):
    out = args.out or os.environ.get("GROUPDYN_OUT") or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("GROUPDYN_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


def _factors(args):
    return FactorPair(up=args.up, down=args.down)


def _sim_config(args, record_tallies=False):
    kwargs = {}
    sources = sum(x is not None for x in (args.p, args.mu_file, args.mu_range))
    if sources != 1:
        raise ConfigError("give exactly one of --p, --mu-file, --mu-range")
    if args.p is not None:
        kwargs["p"] = args.p
    elif args.mu_file is not None:
        _, mu = dataio.read_mu(args.mu_file)
        kwargs["mu"] = mu
    else:
        lo, hi = (float(v) for v in args.mu_range.split(","))
        kwargs["mu_range"] = (lo, hi)
    return SimulationConfig(
        users=args.users,
        factors=_factors(args),
        window_rate=args.window_rate,
        max_ticks=args.max_ticks,
        actions=args.actions,
        seed=args.seed,
        record_tallies=record_tallies,
        **kwargs,
    )


def cmd_simulate(args):
    out = _out_dir(args)
    config = _sim_config(args, record_tallies=args.tallies)
    result = simulate_ensemble(config, threads=_threads(args))
    path = out / "trajectories.jsonl"
    skipped = dataio.write_trajectories(path, result.trajectories, on_overflow="skip")
    failures = result.failures + skipped
    summary = {
        "written": len(result.trajectories) - len(skipped),
        "overflowed": [a for a, _ in failures],
    }
    dataio.write_json(out / "simulate_summary.json", summary)
    print(
        f"simulate: wrote {summary['written']} trajectories to {path}"
        + (f" ({len(failures)} overflowed)" if failures else "")
    )
    return EXIT_OK


def cmd_synth(args):
    out = _out_dir(args)
    kwargs = dict(
        users=args.users,
        actions=args.actions,
        seed=args.seed,
        window_rate=args.window_rate,
        max_ticks=args.max_ticks,
        out_degree=args.out_degree,
    )
    if args.scenario == "homogeneous":
        kwargs["p"] = args.p if args.p is not None else 0.3
    elif args.scenario == "heterogeneous":
        lo, hi = (float(v) for v in (args.mu_range or "0.0,0.1").split(","))
        kwargs["mu_range"] = (lo, hi)
    else:
        kwargs.update(ticks=args.ticks, radius=args.radius, spacing=args.spacing)
    paths = dataio.synth_corpus(out, args.scenario, **kwargs)
    print(f"synth: wrote {args.scenario} corpus under {paths.root}")
    return EXIT_OK


def cmd_fit_mu(args):
    out = _out_dir(args)
    events = dataio.parse_event_log(args.events)
    edges = dataio.parse_edge_list(args.edges)
    users = edges.users | {r.user for r in events.records}
    obs = ObservedActions(users, [(e.src, e.dst) for e in edges.edges], events.records)
    actions = [args.action] if args.action else None
    model, stats = estimate_individual_model(obs, actions=actions, floor=args.floor)
    path = out / "mu_estimates.csv"
    dataio.write_mu(path, model.user_ids, model.mu)
    summary = f"clamped {stats['clamped']}, unexposed {stats['unexposed']}"
    if args.window_rate is not None:
        # Full micro -> meso -> macro parameter record.
        params = micro_to_meso(model)
        macro = meso_to_macro(params, args.window_rate)
        dataio.write_json(
            out / "group_params.json",
            {
                "tau": params.drift,
                "delta_sq": params.variance,
                "lambda": args.window_rate,
                "alpha": macro.exponent,
                "C": macro.amplitude,
                "alpha_alt": non_radical_exponent(params, args.window_rate),
            },
        )
        summary += f", alpha={macro.exponent:.4f}"
    print(f"fit-mu: wrote {len(model.mu)} estimates to {path} ({summary})")
    return EXIT_OK


def cmd_fit_factors(args):
    out = _out_dir(args)
    trajectories = dataio.read_trajectories(args.trajectories)
    if args.action is not None:
        trajectories = [t for t in trajectories if t.action_id == args.action]
        if not trajectories:
            raise ConfigError(f"action {args.action!r} not found")
    records = []
    failed = 0
    for traj in trajectories:
        try:
            est = estimate_factors(traj, window=args.window)
        except (EstimationError, GroupDynError) as exc:
            failed += 1
            records.append({"action_id": traj.action_id, "error": str(exc)})
            continue
        records.append(
            {
                "action_id": traj.action_id,
                "up": est.factors.up,
                "down": est.factors.down,
                "pairs_used": est.pairs_used,
                "pairs_skipped": est.pairs_skipped,
            }
        )
    path = out / "factors.json"
    dataio.write_json(path, records)
    print(f"fit-factors: wrote {len(records) - failed} estimates to {path}"
          + (f" ({failed} failed)" if failed else ""))
    return EXIT_OK


def _load_samples(args):
    """Samples either from a CSV column (linear) or from trajectories (log-valued)."""
    if args.input:
        data = np.loadtxt(args.input, delimiter=",", ndmin=1)
        if data.ndim > 1:
            data = data[:, -1]
        return data, False
    if not args.trajectories:
        raise ConfigError("give --input or --trajectories")
    trajectories = dataio.read_trajectories(args.trajectories)
    if getattr(args, "tick", None) is not None:
        vals = [t.log_count_at(args.tick) for t in trajectories if t.full_ticks >= args.tick]
        return np.asarray(vals), True
    return np.array([t.log_total for t in trajectories]), True


def cmd_fit_lognormal(args):
    out = _out_dir(args)
    values, is_log = _load_samples(args)
    if is_log:
        if values.size < 2:
            raise FitError("need at least two samples")
        fit = LognormalFit(
            mean=float(np.mean(values)),
            variance=float(np.var(values)),
            n_samples=int(values.size),
            tick=getattr(args, "tick", None),
        )
        qq = qq_points(values, fit, log_input=True)
    else:
        fit = lognormal_mle(values)
        qq = qq_points(values, fit)
    record = {
        "mean_log": fit.mean,
        "var_log": fit.variance,
        "n": fit.n_samples,
        "qq_slope": qq.slope,
        "qq_intercept": qq.intercept,
        "qq_r2": qq.r_squared,
    }
    dataio.write_json(out / "lognormal_fit.json", record)
    dataio.export_plot_points(out / "qq_points.csv", "qq", qq)
    print(
        f"fit-lognormal: mean={fit.mean:.4g} var={fit.variance:.4g} "
        f"qq_slope={qq.slope:.3f} r2={qq.r_squared:.4f}"
    )
    return EXIT_OK


def cmd_fit_powerlaw(args):
    out = _out_dir(args)
    values, is_log = _load_samples(args)
    bounds = None
    if args.xmin_floor is not None:
        bounds = (args.xmin_floor, None)
    fit = powerlaw_fit(
        values,
        log_input=is_log,
        discrete=True if args.discrete else None,
        x_min_bounds=bounds,
    )
    p_value = powerlaw_pvalue(values, fit, n_boot=args.bootstrap, seed=args.seed,
                              threads=_threads(args))
    record = {
        "exponent": fit.exponent,
        "model_exponent": fit.model_exponent,
        "x_min": fit.x_min if math.isfinite(fit.x_min) else None,
        "log_x_min": fit.log_x_min,
        "amplitude": fit.amplitude if math.isfinite(fit.amplitude) else None,
        "log_amplitude": fit.log_amplitude,
        "ks": fit.ks,
        "n_tail": fit.n_tail,
        "n_samples": fit.n_samples,
        "discrete": fit.discrete,
        "p_value": p_value,  # null means undefined (no bootstrap requested)
    }
    dataio.write_json(out / "powerlaw_fit.json", record)
    if not is_log:
        dataio.export_plot_points(
            out / "pdf_points.csv", "pdf-loglog", values,
            x_min=fit.x_min if math.isfinite(fit.x_min) else None,
        )
    pv = "undefined" if p_value is None else f"{p_value:.3f}"
    print(
        f"fit-powerlaw: exponent={fit.exponent:.3f} x_min={fit.x_min:.4g} "
        f"ks={fit.ks:.4f} p-value={pv}"
    )
    return EXIT_OK


def cmd_predict_group(args):
    out = _out_dir(args)
    trajectories = dataio.read_trajectories(args.trajectories)
    rows = []
    failed = 0
    for traj in trajectories:
        if traj.tallies is None or traj.full_ticks <= args.train_window + 1:
            failed += 1
            continue
        try:
            est = estimate_factors(traj, window=args.train_window)
        except EstimationError:
            failed += 1
            continue
        start = args.train_window
        log_true = traj.log_counts[start + 1 : traj.full_ticks + 1]
        predicted = predict_log_counts(
            float(traj.log_counts[start]), traj.tallies[start : traj.full_ticks], est.factors
        )
        one_step_err = np.abs(
            np.diff(traj.log_counts[start : traj.full_ticks + 1])
            - np.array([
                t.adopters * est.factors.log_up - t.non_adopters * est.factors.log_down
                for t in traj.tallies[start : traj.full_ticks]
            ])
        )
        rows.append(
            {
                "action_id": traj.action_id,
                "up": est.factors.up,
                "down": est.factors.down,
                "test_ticks": int(log_true.size),
                "mean_abs_log_error_one_step": float(np.mean(one_step_err)),
                "final_log_error": float(abs(predicted[-1] - log_true[-1])),
            }
        )
    dataio.write_json(out / "group_predictions.json", rows)
    mean_err = float(np.mean([r["mean_abs_log_error_one_step"] for r in rows])) if rows else float("nan")
    print(
        f"predict-group: {len(rows)} actions, mean one-step |log error| = {mean_err:.4g}"
        + (f" ({failed} skipped)" if failed else "")
    )
    return EXIT_OK


def cmd_detect_bursts(args):
    out = _out_dir(args)
    trajectories = dataio.read_trajectories(args.trajectories)
    path = out / "bursts.csv"
    total = 0
    with open(path, "w", newline="") as fh:
        fh.write("action_id,tick\n")
        for traj in trajectories:
            series = detect_bursts(traj, args.radius)
            for tick in np.nonzero(series.labels)[0]:
                fh.write(f"{traj.action_id},{int(tick)}\n")
                total += 1
    print(f"detect-bursts: {total} bursts across {len(trajectories)} trajectories -> {path}")
    return EXIT_OK


def cmd_predict_bursts(args):
    out = _out_dir(args)
    trajectories = dataio.read_trajectories(args.trajectories)
    dataset = build_dataset(trajectories, args.radius, args.window, args.kind)
    dataio.write_burst_dataset(out / f"burst_dataset_{args.kind}.csv", dataset)
    train_idx, test_idx = chronological_split(dataset, args.train_frac)
    model = train_logreg((dataset.features[train_idx], dataset.labels[train_idx]), l2=args.l2)
    metrics = evaluate(model, (dataset.features[test_idx], dataset.labels[test_idx]))
    record = {
        "kind": args.kind,
        "window": args.window,
        "radius": args.radius,
        "train_rows": int(train_idx.size),
        "test_rows": int(test_idx.size),
        "precision": metrics.precision,
        "recall": metrics.recall,
        "f1": metrics.f1,
        "accuracy": metrics.accuracy,
        "iterations": model.iterations,
        "final_loss": model.final_loss,
    }
    dataio.write_json(out / f"burst_prediction_{args.kind}.json", record)
    print(
        f"predict-bursts[{args.kind}]: P={metrics.precision:.3f} R={metrics.recall:.3f} "
        f"F1={metrics.f1:.3f} (test rows {test_idx.size})"
    )
    return EXIT_OK


def cmd_sweep(args):
    out = _out_dir(args)
    trajectories = dataio.read_trajectories(args.trajectories)
    windows = [int(w) for w in args.windows.split(",")]
    kinds = ["factor", "count"] if args.kind == "both" else [args.kind]
    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        fh.write("kind,window,precision,recall,f1\n")
        for kind in kinds:
            for entry in window_sweep(trajectories, args.radius, windows, kind,
                                      train_frac=args.train_frac, l2=args.l2):
                if entry.metrics is None:
                    fh.write(f"{kind},{entry.window},,,\n")
                else:
                    m = entry.metrics
                    fh.write(
                        f"{kind},{entry.window},{m.precision!r},{m.recall!r},{m.f1!r}\n"
                    )
    print(f"sweep: wrote {path}")
    return EXIT_OK


def cmd_verify_theorems(args):
    out = _out_dir(args)
    checks = verification.run_all(seed=args.seed, quick=args.quick)
    lines = [c.line() for c in checks]
    for line in lines:
        print(line)
    dataio.write_json(
        out / "verify_theorems.json",
        [{"name": c.name, "passed": c.passed, **{k: _jsonable(v) for k, v in c.details.items()}}
         for c in checks],
    )
    if all(c.passed for c in checks):
        print("verify-theorems: all checks passed")
        return EXIT_OK
    print("verify-theorems: FAILURES present")
    return EXIT_NUMERIC


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return float(v)
    return v


def _apply_config_file(argv):
    """Expand ``--config file.json`` into flags (explicit flags win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    try:
        path = argv[i + 1]
    except IndexError:
        raise ConfigError("--config needs a file path") from None
    rest = argv[:i] + argv[i + 2 :]
    with open(path) as fh:
        try:
            values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"bad config JSON: {exc}") from None
    if not isinstance(values, dict):
        raise DataFormatError("config file must hold a JSON object")
    extra = []
    for key, value in values.items():
        flag = "--" + str(key).replace("_", "-")
        if flag in rest:
            continue  # command-line value overrides the file
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        else:
            extra.extend([flag, str(value)])
    return rest + extra


def _add_common(p):
    p.add_argument("--out", default=None, help="output directory (default: $GROUPDYN_OUT or ./out)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--config", default=None,
                   help="JSON file of flag values (expanded before parsing)")


def _add_sim_args(p):
    p.add_argument("--users", type=int, required=True)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--mu-file", default=None)
    p.add_argument("--mu-range", default=None, help="lo,hi for uniform sampling")
    p.add_argument("--up", type=float, default=math.e)
    p.add_argument("--down", type=float, default=1.0)
    p.add_argument("--lambda", dest="window_rate", type=float, required=True,
                   help="observation-window rate")
    p.add_argument("--actions", type=int, default=1000)
    p.add_argument("--max-ticks", type=int, default=200)


def build_parser():
    parser = argparse.ArgumentParser(prog="groupdyn", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an ensemble of group trajectories")
    _add_common(p)
    _add_sim_args(p)
    p.add_argument("--tallies", action="store_true", help="record per-tick tallies")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("synth", help="generate a labeled synthetic corpus")
    _add_common(p)
    p.add_argument("--scenario", required=True, choices=dataio.SCENARIOS)
    p.add_argument("--users", type=int, default=100)
    p.add_argument("--actions", type=int, default=200)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--mu-range", default=None)
    p.add_argument("--lambda", dest="window_rate", type=float, default=0.1)
    p.add_argument("--max-ticks", type=int, default=200)
    p.add_argument("--out-degree", type=int, default=5)
    p.add_argument("--ticks", type=int, default=240, help="burst scenario: series length")
    p.add_argument("--radius", type=int, default=5, help="burst scenario: label window radius")
    p.add_argument("--spacing", type=int, default=30, help="burst scenario: spike spacing")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fit-mu", help="estimate adoption probabilities from events + edges")
    _add_common(p)
    p.add_argument("--events", required=True)
    p.add_argument("--edges", required=True)
    p.add_argument("--action", default=None, help="restrict to one action id")
    p.add_argument("--floor", type=float, default=0.0)
    p.add_argument("--lambda", dest="window_rate", type=float, default=None,
                   help="also derive the macro parameter record at this window rate")
    p.set_defaults(func=cmd_fit_mu)

    p = sub.add_parser("fit-factors", help="estimate upward/downward factors per action")
    _add_common(p)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--action", default=None)
    p.add_argument("--window", type=int, default=None, help="training transitions to use")
    p.set_defaults(func=cmd_fit_factors)

    p = sub.add_parser("fit-lognormal", help="fit ln-count normal law and QQ diagnostics")
    _add_common(p)
    p.add_argument("--input", default=None, help="CSV of positive samples")
    p.add_argument("--trajectories", default=None)
    p.add_argument("--tick", type=int, default=None, help="inspect ln n(tick) across actions")
    p.set_defaults(func=cmd_fit_lognormal)

    p = sub.add_parser("fit-powerlaw", help="fit a truncated power law to totals")
    _add_common(p)
    p.add_argument("--input", default=None, help="CSV of positive samples")
    p.add_argument("--trajectories", default=None, help="use ensemble totals")
    p.add_argument("--bootstrap", type=int, default=1000)
    p.add_argument("--discrete", action="store_true", help="force discrete fitting")
    p.add_argument("--xmin-floor", type=float, default=None,
                   help="lowest allowed truncation point")
    p.set_defaults(func=cmd_fit_powerlaw)

    p = sub.add_parser("predict-group", help="forward-predict held-out trajectory ticks")
    _add_common(p)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--train-window", type=int, default=10)
    p.set_defaults(func=cmd_predict_group)

    p = sub.add_parser("detect-bursts", help="label strict-maximum burst ticks")
    _add_common(p)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--radius", type=int, default=5)
    p.set_defaults(func=cmd_detect_bursts)

    p = sub.add_parser("predict-bursts", help="train/evaluate a one-step burst classifier")
    _add_common(p)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--kind", choices=["factor", "count"], default="factor")
    p.add_argument("--window", type=int, default=6)
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--l2", type=float, default=1e-4)
    p.set_defaults(func=cmd_predict_bursts)

    p = sub.add_parser("sweep", help="score burst prediction over window lengths")
    _add_common(p)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--windows", required=True, help="comma-separated window lengths")
    p.add_argument("--kind", choices=["factor", "count", "both"], default="both")
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--train-frac", type=float, default=0.7)
    p.add_argument("--l2", type=float, default=1e-4)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify-theorems", help="run the built-in limit-law checks")
    _add_common(p)
    p.add_argument("--quick", action="store_true", help="smaller ensembles")
    p.set_defaults(func=cmd_verify_theorems)

    return parser


def main(argv=None):
    parser = build_parser()
    if argv is None:
        argv = sys.argv[1:]
    try:
        argv = _apply_config_file(list(argv))
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0,) else 0
    except (DataFormatError, FileNotFoundError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (DataFormatError, FileNotFoundError, ConfigError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OverflowTickError, NumericalError, FitError, EstimationError, TrainingError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except GroupDynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
