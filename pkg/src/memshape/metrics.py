"""Reduce simulation traces to bandwidth statistics, and run partition/core sweeps."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .machine import DEFAULT_WORKSPACE_FACTOR, MachineConfig, PartitionPlan, Stagger, check_capacity
from .sim import SimConfig, SimTrace, simulate
from .traffic import ReusePolicy
from .workload import CnnModel

SWEEP_HEADER = ("sweep_value", "mean_bw", "std_bw", "makespan", "throughput",
                "relative_performance", "std_reduction", "mean_gain", "feasible")


@dataclass(frozen=True)
class SummaryStats:
    mean_bw: float
    std_bw: float
    makespan: float
    throughput: float
    images_total: int


def summarize_samples(samples: Sequence[float], makespan: float, images_total: int) -> SummaryStats:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValueError("cannot summarize an empty trace")
    if not makespan > 0:
        raise ValueError("makespan must be > 0")
    # population statistics
    return SummaryStats(float(samples.mean()), float(samples.std()), float(makespan),
                        images_total / makespan, images_total)


def summarize(trace: SimTrace, images_total: int) -> SummaryStats:
    return summarize_samples(trace.aggregate_bw, trace.makespan, images_total)


class SweepMode(str, Enum):
    PARTITIONS = "partitions"
    CORES = "cores"


@dataclass(frozen=True)
class SweepRow:
    sweep_value: int
    feasible: bool
    stats: SummaryStats | None = None
    relative_performance: float = math.nan
    std_reduction: float = math.nan
    mean_gain: float = math.nan
    dram_needed: int = 0

    def csv_fields(self) -> list[str]:
        if not self.feasible:
            return [str(self.sweep_value)] + [""] * 7 + ["0"]
        s = self.stats
        return [str(self.sweep_value)] + [
            repr(float(v)) for v in (s.mean_bw, s.std_bw, s.makespan, s.throughput,
                                      self.relative_performance, self.std_reduction, self.mean_gain)
        ] + ["1"]


def _case(model, machine, mode, value, images_per_pass, passes, stagger):
    """(machine, plan) for one sweep point."""
    if mode is SweepMode.PARTITIONS:
        return machine, PartitionPlan(value, images_per_pass, passes, stagger)
    # one image per core, single synchronous group
    return machine.with_cores(value), PartitionPlan(1, value, passes, stagger)


def _speedup(base: SummaryStats, row: SummaryStats) -> float:
    if base.images_total == row.images_total:
        return base.makespan / row.makespan
    return row.throughput / base.throughput


def sweep(
    model: CnnModel,
    machine: MachineConfig,
    policy: ReusePolicy = ReusePolicy(),
    sim: SimConfig = SimConfig(record_trace=False),
    mode: SweepMode | str = SweepMode.PARTITIONS,
    values: Sequence[int] = (1, 2, 4, 8, 16),
    images_per_pass: int = 64,
    passes: int = 4,
    stagger: Stagger = Stagger(),
    workspace_factor: float = DEFAULT_WORKSPACE_FACTOR,
    jobs: int = 1,
) -> list[SweepRow]:
    """One row per value, compared against the first value.

    Partitions mode keeps ``images_per_pass * passes`` images for every row.
    Cores mode overrides the core count and runs one image per core.
    Rows that do not fit in DRAM are returned with ``feasible=False``.
    """
    mode = SweepMode(mode)
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")

    def run(value):
        m, plan = _case(model, machine, mode, value, images_per_pass, passes, stagger)
        report = check_capacity(model, m, plan, workspace_factor)
        if not report.feasible:
            return None, report
        trace = simulate(model, m, plan, policy, sim, workspace_factor)
        return summarize(trace, plan.images_total), report

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, values))
    else:
        results = [run(v) for v in values]

    base = results[0][0]
    rows = []
    for value, (stats, report) in zip(values, results):
        if stats is None:
            rows.append(SweepRow(value, False, dram_needed=report.dram_needed))
            continue
        if base is None:
            rows.append(SweepRow(value, True, stats, dram_needed=report.dram_needed))
            continue
        rows.append(SweepRow(
            value, True, stats,
            relative_performance=1.0 if stats is base else _speedup(base, stats),
            std_reduction=0.0 if stats is base else 1.0 - stats.std_bw / base.std_bw,
            mean_gain=0.0 if stats is base else stats.mean_bw / base.mean_bw - 1.0,
            dram_needed=report.dram_needed,
        ))
    return rows


def format_sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for row in rows:
        w.writerow(row.csv_fields())
    return buf.getvalue()


def format_sweep_table(rows: Sequence[SweepRow], mode: SweepMode | str = SweepMode.PARTITIONS) -> str:
    mode = SweepMode(mode)
    label = "parts" if mode is SweepMode.PARTITIONS else "cores"
    lines = [f"{label:>6} {'mean GB/s':>10} {'std GB/s':>9} {'makespan s':>11} {'img/s':>9} "
             f"{'rel perf':>9} {'std red.':>9} {'mean gain':>10}"]
    for r in rows:
        if not r.feasible:
            lines.append(f"{r.sweep_value:>6}  infeasible: needs {r.dram_needed / 2**30:.2f} GiB of DRAM")
            continue
        s = r.stats
        lines.append(
            f"{r.sweep_value:>6} {s.mean_bw / 1e9:>10.1f} {s.std_bw / 1e9:>9.1f} {s.makespan:>11.4f} "
            f"{s.throughput:>9.1f} {r.relative_performance:>9.4f} {r.std_reduction:>+9.1%} {r.mean_gain:>+10.1%}")
    return "\n".join(lines) + "\n"


def format_trace_csv(trace: SimTrace) -> str:
    """Trace CSV: ``t,aggregate_bw,layer_p0,...``; t is the step start time."""
    if trace.layers.shape[0] != trace.n_steps:
        raise ValueError("trace was run without record_trace; no per-partition layers to write")
    n_parts = trace.layers.shape[1]
    buf = io.StringIO()
    buf.write(",".join(["t", "aggregate_bw"] + [f"layer_p{p}" for p in range(n_parts)]) + "\n")
    for k in range(trace.n_steps):
        fields = [f"{k * trace.dt:.9f}", repr(float(trace.aggregate_bw[k]))]
        fields += [str(int(x)) for x in trace.layers[k]]
        buf.write(",".join(fields) + "\n")
    return buf.getvalue()


def parse_trace_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Inverse of format_trace_csv: (t, aggregate_bw, layers)."""
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if header[:2] != ["t", "aggregate_bw"]:
        raise ValueError(f"not a trace CSV header: {header!r}")
    t, bw, layers = [], [], []
    for row in reader:
        t.append(float(row[0]))
        bw.append(float(row[1]))
        layers.append([int(x) for x in row[2:]])
    return (np.array(t), np.array(bw, dtype=np.float64),
            np.array(layers, dtype=np.int64).reshape(len(layers), len(header) - 2))
