"""memshape command line: cost, simulate, sweep, validate.

Exit status: 0 success, 1 plan does not fit in DRAM, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import metrics
from .machine import (DEFAULT_WORKSPACE_FACTOR, MachineConfig, MachineFormatError, PartitionPlan, Stagger,
                      check_capacity, load_machine)
from .sim import KERNEL_NAME, SimConfig, StaggerMode, simulate
from .traffic import ReusePolicy, WeightMode, pass_traffic
from .workload import CnnModel, ModelFormatError, layer_cost, load_model, weight_traffic_ratio

EXIT_OK, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2

COST_HEADER = ("index", "name", "kind", "flops_per_image", "weight_bytes", "in_act_bytes", "out_act_bytes",
               "pass_flops", "pass_bytes", "intensity")


class InputError(Exception):
    pass


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"expected positive integers: {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True, metavar="PATH", help="model CSV")
    common.add_argument("--machine", required=True, metavar="PATH", help="machine key=value file")
    common.add_argument("--partitions", type=_positive_int, default=1, metavar="N")
    common.add_argument("--images", type=_positive_int, default=64, metavar="N",
                        help="images per pass across all partitions (default 64)")
    common.add_argument("--passes", type=_positive_int, default=4, metavar="N")
    common.add_argument("--stagger", choices=["none", "uniform", "random"], default="uniform")
    common.add_argument("--stagger-mode", choices=["phase", "delay"], default="phase",
                        help="apply stagger offsets as a phase shift (default) or a delayed start")
    common.add_argument("--seed", type=_seed, default=42, metavar="U64")
    common.add_argument("--weight-mode", choices=["fit-once", "reload"], default="fit-once")
    common.add_argument("--producer-consumer", choices=["on", "off"], default="off")
    common.add_argument("--write-outputs", choices=["always", "fit"], default="always")
    common.add_argument("--workspace-factor", type=float, default=DEFAULT_WORKSPACE_FACTOR, metavar="X")
    common.add_argument("--dt", type=float, default=None, metavar="SECONDS")
    common.add_argument("--out", metavar="PATH", help="write the command's CSV here")

    parser = argparse.ArgumentParser(prog="memshape", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cost", parents=[common], help="per-layer flops/bytes report")
    p.add_argument("--batch", type=_positive_int, default=None, metavar="N",
                   help="batch for the weight-traffic ratio (default: --images)")

    p = sub.add_parser("simulate", parents=[common], help="run one configuration")
    p.add_argument("--trace", metavar="PATH", help="write the bandwidth trace CSV here")

    p = sub.add_parser("sweep", parents=[common], help="sweep partition or core counts")
    p.add_argument("--mode", choices=["partitions", "cores"], default="partitions")
    p.add_argument("--values", type=_int_list, default=None, metavar="LIST",
                   help="comma-separated sweep values (default 1,2,4,8,16 or 8,16,32,64)")
    p.add_argument("--jobs", type=_positive_int, default=1, metavar="N")

    sub.add_parser("validate", parents=[common], help="check the plan fits in DRAM")
    return parser


def _load(args) -> tuple[CnnModel, MachineConfig]:
    for path in (args.model, args.machine):
        if not Path(path).is_file():
            raise InputError(f"no such file: {path}")
    try:
        return load_model(args.model), load_machine(args.machine)
    except (ModelFormatError, MachineFormatError) as exc:
        raise InputError(str(exc)) from None


def _plan(args, machine: MachineConfig) -> PartitionPlan:
    try:
        plan = PartitionPlan(args.partitions, args.images, args.passes, Stagger(args.stagger, args.seed))
        plan.validate_for(machine)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return plan


def _policy(args) -> ReusePolicy:
    return ReusePolicy(
        weight_mode=WeightMode.FIT_ONCE if args.weight_mode == "fit-once" else WeightMode.RELOAD_PER_IMAGE,
        producer_consumer=args.producer_consumer == "on",
        write_outputs_always=args.write_outputs == "always",
    )


def _sim(args, record: bool) -> SimConfig:
    try:
        return SimConfig(dt=args.dt, record_trace=record, stagger_mode=StaggerMode(args.stagger_mode))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_cost(args, out) -> int:
    model, machine = _load(args)
    plan = _plan(args, machine)
    traffic = pass_traffic(model, machine, plan, _policy(args))
    rows = []
    for i, (layer, t) in enumerate(zip(model.layers, traffic)):
        c = layer_cost(layer, machine.element_size)
        rows.append((i, layer.name, layer.kind.value, c.flops_per_image, c.weight_bytes,
                     c.in_act_bytes_per_image, c.out_act_bytes_per_image, t.flops_total, t.bytes_total,
                     t.intensity))

    print(f"model {model.name}: {len(model)} layers; per-partition batch {plan.batch_per_partition}, "
          f"llc share {machine.llc_bytes // plan.n_partitions} B", file=out)
    print(f"{'#':>4} {'layer':<22} {'kind':<8} {'MFLOP/img':>11} {'weights B':>11} {'in B/img':>11} "
          f"{'out B/img':>11} {'flop/B':>9}", file=out)
    for i, name, kind, f, w, a_in, a_out, _, _, ai in rows:
        print(f"{i:>4} {name:<22} {kind:<8} {f / 1e6:>11.3f} {w:>11} {a_in:>11} {a_out:>11} {ai:>9.2f}",
              file=out)
    total_f = sum(r[3] for r in rows)
    total_w = sum(r[4] for r in rows)
    print(f"total: {total_f / 1e9:.3f} GFLOP/image, {total_w} weight bytes", file=out)

    batch = args.batch or args.images
    try:
        ratio = weight_traffic_ratio(model, batch, machine.element_size)
        print(f"weight_traffic_ratio (conv+fc, batch {batch}): {ratio:.6g}", file=out)
    except ValueError as exc:
        print(f"weight_traffic_ratio (conv+fc, batch {batch}): undefined ({exc})", file=out)

    if args.out:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COST_HEADER)
        for r in rows:
            w.writerow(list(r[:-1]) + [repr(float(r[-1]))])
        _write(args.out, buf.getvalue())
    return EXIT_OK


def cmd_validate(args, out) -> int:
    model, machine = _load(args)
    plan = _plan(args, machine)
    report = check_capacity(model, machine, plan, args.workspace_factor)
    print(f"model {model.name}, workspace factor {args.workspace_factor:g}", file=out)
    out.write(report.describe())
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def cmd_simulate(args, out) -> int:
    model, machine = _load(args)
    plan = _plan(args, machine)
    report = check_capacity(model, machine, plan, args.workspace_factor)
    if not report.feasible:
        out.write(report.describe())
        return EXIT_INFEASIBLE
    sim = _sim(args, record=bool(args.trace))
    trace = simulate(model, machine, plan, _policy(args), sim, args.workspace_factor)
    stats = metrics.summarize(trace, plan.images_total)

    print(f"model {model.name}: {plan.n_partitions} partition(s) x {plan.batch_per_partition} images, "
          f"{plan.passes} passes, stagger {plan.stagger.kind.value} ({sim.stagger_mode.value})", file=out)
    print(f"kernel {KERNEL_NAME}, dt {trace.dt!r} s, {trace.n_steps} steps", file=out)
    print(f"mean_bw {stats.mean_bw!r}", file=out)
    print(f"std_bw {stats.std_bw!r}", file=out)
    print(f"makespan {stats.makespan!r}", file=out)
    print(f"throughput {stats.throughput!r}", file=out)
    print(f"images_total {stats.images_total}", file=out)
    print(f"total_bytes {trace.total_bytes!r}", file=out)
    print(f"(mean {stats.mean_bw / 1e9:.1f} GB/s, std {stats.std_bw / 1e9:.1f} GB/s, "
          f"{stats.throughput:.1f} images/s)", file=out)

    if args.trace:
        _write(args.trace, metrics.format_trace_csv(trace))
    if args.out:
        _write(args.out, "mean_bw,std_bw,makespan,throughput,images_total\n"
               f"{stats.mean_bw!r},{stats.std_bw!r},{stats.makespan!r},{stats.throughput!r},"
               f"{stats.images_total}\n")
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    model, machine = _load(args)
    values = args.values or ([1, 2, 4, 8, 16] if args.mode == "partitions" else [8, 16, 32, 64])
    try:
        rows = metrics.sweep(
            model, machine, _policy(args), _sim(args, record=False), args.mode, values,
            images_per_pass=args.images, passes=args.passes, stagger=Stagger(args.stagger, args.seed),
            workspace_factor=args.workspace_factor, jobs=args.jobs)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    print(f"model {model.name}, {args.mode} sweep, stagger {args.stagger} ({args.stagger_mode})", file=out)
    out.write(metrics.format_sweep_table(rows, args.mode))
    if args.out:
        _write(args.out, metrics.format_sweep_csv(rows))
    return EXIT_OK


COMMANDS = {"cost": cmd_cost, "simulate": cmd_simulate, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except InputError as exc:
        print(f"memshape: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
