"""Command line front end.

Subcommands:
  partition   show the candidate grid implied by interval/tolerance settings
  train       fit surrogate output weights from a CSV of recorded samples
  run         simulate one closed-loop experiment and optionally save a trace
  mc          run a Monte Carlo batch and report the averaged tracking index
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from .config import parse_config
from .errors import DualctlError
from .grid import BoundedInterval, partition_interval
from .harness import (
    monte_carlo,
    run_experiment,
    run_metrics,
    write_trace,
)
from .rbf import TrainingDataset, geometry, save_network, train_offline


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _print_partition(name: str, interval: BoundedInterval) -> int:
    mids = partition_interval(interval)
    print(
        f"{name}: [{interval.lower}, {interval.upper}] eps={interval.admissible_error} "
        f"-> {mids.count} candidates, sub-interval {mids.sub_interval_length:.6g}"
    )
    print("  midpoints: " + " ".join(f"{m:.6g}" for m in mids.midpoints))
    return mids.count


def _cmd_partition(args) -> int:
    if args.config:
        cfg = parse_config(args.config)
        total = 1
        for name, ch in (("alpha", cfg.alpha), ("beta", cfg.beta), ("gamma", cfg.gamma)):
            total *= _print_partition(name, ch.interval)
        print(f"grid: {total} candidates, uniform prior {1.0 / total:.6g}")
    else:
        if None in (args.lower, args.upper, args.eps):
            print("partition: pass --config or all of --lower/--upper/--eps", file=sys.stderr)
            return 2
        _print_partition(
            "interval", BoundedInterval(args.lower, args.upper, args.eps)
        )
    return 0


def _read_samples(path):
    with open(path) as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DualctlError(f"{path}: empty sample file")
        state_cols = sorted(c for c in reader.fieldnames if c == "x" or c.startswith("x"))
        if not state_cols or "u" not in reader.fieldnames or "y" not in reader.fieldnames:
            raise DualctlError(
                f"{path}: need columns x[,x2,...], u, y; got {reader.fieldnames}"
            )
        states, inputs, outputs = [], [], []
        for row in reader:
            states.append([float(row[c]) for c in state_cols])
            inputs.append(float(row["u"]))
            outputs.append(float(row["y"]))
    return states, inputs, outputs


def _cmd_train(args) -> int:
    states, inputs, outputs = _read_samples(args.data)
    data = TrainingDataset(states, inputs, outputs, ridge=args.ridge)
    f_geom = geometry(args.f_centers, args.f_width2)
    g_geom = geometry(args.g_centers, args.g_width2)
    net, rms = train_offline(data, f_geom, g_geom)
    save_network(net, args.out, comment=args.comment)
    print(f"fit {f_geom.size}+{g_geom.size} weights on {len(inputs)} samples, residual rms {rms:.6g}")
    print(f"wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = parse_config(args.config)
    trace = run_experiment(
        cfg,
        controller=args.controller,
        seed=args.seed,
        collect_posteriors=args.full_posteriors,
    )
    m = run_metrics(trace)
    resets = [k for k, r in zip(trace.k, trace.reset) if r]
    print(
        f"{trace.name}: {len(trace)} rows, controller={trace.controller}, seed={trace.seed}"
    )
    print(f"j_index={m.j_index:.6g} rms={m.rms:.6g} mean_abs={m.mean_abs:.6g}")
    print(f"resets={len(resets)}" + (f" at k={resets}" if resets else ""))
    print(
        f"final argmax_t={trace.argmax_t[-1]} (max_pi={trace.max_pi[-1]:.6g}), "
        f"wall={trace.wall_time:.3f}s"
    )
    if args.out:
        write_trace(trace, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_mc(args) -> int:
    cfg = parse_config(args.config)
    result = monte_carlo(
        cfg,
        runs=args.runs,
        seed_base=args.seed_base,
        controller=args.controller,
        jobs=args.jobs,
    )
    m = result.metrics
    print(
        f"{result.name}: {len(result.traces)}/{result.requested} runs ok, "
        f"controller={result.controller}, seed_base={result.seed_base}"
    )
    print(
        f"J_M={m.j_m:.6g} std={m.j_std:.6g} mean_abs={m.mean_abs:.6g} "
        f"median_wall={m.median_wall_time:.3f}s"
    )
    if result.failures:
        print(f"failed runs: {[i for i, _ in result.failures]}")
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        summary = os.path.join(args.out_dir, "summary.csv")
        with open(summary, "w") as fh:
            fh.write("run,seed,j_index\n")
            for i, (s, j) in enumerate(zip(result.seeds, m.j_values)):
                fh.write(f"{i},{s},{j!r}\n")
        if args.save_traces:
            for i, trace in enumerate(result.traces):
                write_trace(trace, os.path.join(args.out_dir, f"run{i:03d}.csv"))
        print(f"wrote {args.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualctl", description=__doc__.strip().splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("partition", help="show candidate grids for intervals")
    pp.add_argument("--config", help="experiment document; shows all three channels")
    pp.add_argument("--lower", type=float)
    pp.add_argument("--upper", type=float)
    pp.add_argument("--eps", type=float, help="admissible identification error")
    pp.set_defaults(fn=_cmd_partition)

    pt = sub.add_parser("train", help="fit surrogate output weights from samples")
    pt.add_argument("--data", required=True, help="CSV with columns x[,x2,...],u,y")
    pt.add_argument("--f-centers", type=_float_list, required=True)
    pt.add_argument("--f-width2", type=float, required=True, help="shared squared width of f bases")
    pt.add_argument("--g-centers", type=_float_list, required=True)
    pt.add_argument("--g-width2", type=float, required=True, help="shared squared width of g bases")
    pt.add_argument("--ridge", type=float, default=0.0)
    pt.add_argument("--comment", default=None, help="comment line stored in the parameter file")
    pt.add_argument("--out", required=True)
    pt.set_defaults(fn=_cmd_train)

    pr = sub.add_parser("run", help="simulate one closed-loop experiment")
    pr.add_argument("--config", required=True)
    pr.add_argument("--controller", choices=("proposed", "optimal"), default="proposed")
    pr.add_argument("--seed", type=int, default=None, help="override the document seed")
    pr.add_argument("--out", help="write the trace CSV here")
    pr.add_argument(
        "--full-posteriors", action="store_true",
        help="include per-candidate posterior columns in the trace",
    )
    pr.set_defaults(fn=_cmd_run)

    pm = sub.add_parser("mc", help="run a Monte Carlo batch")
    pm.add_argument("--config", required=True)
    pm.add_argument("--runs", type=int, required=True)
    pm.add_argument("--seed-base", type=int, default=None)
    pm.add_argument("--controller", choices=("proposed", "optimal"), default="proposed")
    pm.add_argument("--jobs", type=int, default=1)
    pm.add_argument("--out-dir", help="write summary.csv (and traces) here")
    pm.add_argument("--save-traces", action="store_true")
    pm.set_defaults(fn=_cmd_mc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DualctlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
