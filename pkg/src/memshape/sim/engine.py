"""Time-stepped execution of all partitions against one shared memory channel."""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from ..machine import (DEFAULT_WORKSPACE_FACTOR, CapacityError, MachineConfig, PartitionPlan,
                       check_capacity, partition_bw_cap, partition_compute)
from ..traffic import ReusePolicy, pass_traffic
from ..workload import CnnModel
from . import _pykernel
from .arbiter import stagger_offsets

log = logging.getLogger(__name__)

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

STEPS_PER_PASS = 2000
DEFAULT_MIN_STEPS = 10_000


def _select_kernel():
    if _ckernel is not None and not os.environ.get("MEMSHAPE_PURE_PYTHON"):
        return _ckernel
    return _pykernel


kernel = _select_kernel()
KERNEL_NAME = "cython" if kernel is _ckernel else "python"


class StaggerMode(str, Enum):
    """How a partition's stagger offset is applied.

    ``phase``: every partition starts at t=0, already advanced by its offset
    worth of compute-bound execution, and finishes the skipped layers last.
    Work per partition is unchanged, so offsets cost no idle time.
    ``delay``: the partition sits idle until its offset, then starts at layer 0.
    """

    PHASE = "phase"
    DELAY = "delay"


@dataclass(frozen=True)
class SimConfig:
    """``dt=None`` picks the step from the workload (see ``auto_dt``)."""

    dt: float | None = None
    min_steps: int = DEFAULT_MIN_STEPS
    record_trace: bool = True
    stagger_mode: StaggerMode = StaggerMode.PHASE

    def __post_init__(self):
        object.__setattr__(self, "stagger_mode", StaggerMode(self.stagger_mode))
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt!r}")
        if self.min_steps < 1:
            raise ValueError("min_steps must be >= 1")


@dataclass
class SimTrace:
    dt: float
    aggregate_bw: np.ndarray
    layers: np.ndarray  # (steps, partitions) global layer counter, -1 when idle
    makespan: float
    total_bytes: float
    total_flops: float
    n_layers: int
    offsets: list[float] = field(default_factory=list)
    start_layers: list[int] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.aggregate_bw)

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_steps) * self.dt


def pass_time_estimate(flops: np.ndarray, compute: float) -> float:
    """Compute-only duration of one pass for one partition."""
    return float(flops.sum()) / compute


def auto_dt(pass_time: float, passes: int, min_steps: int = DEFAULT_MIN_STEPS) -> float:
    return min(pass_time / STEPS_PER_PASS, passes * pass_time / min_steps)


def phase_start_layers(flops: np.ndarray, compute: float, offsets) -> list[int]:
    """Layer a compute-bound partition is executing ``offset`` seconds into a pass."""
    ends = np.cumsum(flops) / compute
    n = len(flops)
    return [min(int(np.searchsorted(ends, off, side="right")), n - 1) for off in offsets]


def run_kernel(flops, bytes_, compute, offsets, passes, peak, dt, record=True, start_layers=None,
               bw_cap=math.inf, impl=None):
    """Run the stepping kernel directly on per-layer (flops, bytes) arrays.

    ``offsets`` are start times; ``start_layers`` the layer each partition
    begins its first pass at (default 0); ``bw_cap`` the most bandwidth one
    partition can draw. Returns
    ``(aggregate_bw, layers, makespan, total_bytes)``.
    """
    flops = np.asarray(flops, dtype=np.float64)
    bytes_ = np.asarray(bytes_, dtype=np.float64)
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt!r}")
    if np.any(flops <= 0):
        raise ValueError("every layer needs flops > 0")
    n_parts = len(offsets)
    # Either memory is saturated or some partition computes at full rate,
    # so this bounds the makespan.
    bound = max(offsets, default=0.0) + n_parts * passes * (bytes_.sum() / min(peak, bw_cap) + flops.sum() / compute)
    max_steps = int(math.ceil(bound / dt)) + 16
    if start_layers is None:
        start_layers = [0] * n_parts
    impl = impl or kernel
    return impl.run(flops, bytes_, float(compute), float(bw_cap), np.asarray(offsets, dtype=np.float64),
                    np.asarray(start_layers, dtype=np.int64), int(passes), float(peak), float(dt),
                    bool(record), max_steps)


def simulate(
    model: CnnModel,
    machine: MachineConfig,
    plan: PartitionPlan,
    policy: ReusePolicy = ReusePolicy(),
    sim: SimConfig = SimConfig(),
    workspace_factor: float = DEFAULT_WORKSPACE_FACTOR,
) -> SimTrace:
    report = check_capacity(model, machine, plan, workspace_factor)
    if not report.feasible:
        raise CapacityError(report)
    compute = partition_compute(machine, plan)
    traffic = pass_traffic(model, machine, plan, policy)
    flops = np.array([t.flops_total for t in traffic], dtype=np.float64)
    bytes_ = np.array([t.bytes_total for t in traffic], dtype=np.float64)

    est = pass_time_estimate(flops, compute)
    dt = sim.dt if sim.dt is not None else auto_dt(est, plan.passes, sim.min_steps)
    offsets = stagger_offsets(plan, est)
    if sim.stagger_mode is StaggerMode.PHASE:
        start_layers = phase_start_layers(flops, compute, offsets)
        start_times = [0.0] * plan.n_partitions
    else:
        start_layers = [0] * plan.n_partitions
        start_times = offsets
    log.debug("simulate %s n=%d dt=%.3g kernel=%s", model.name, plan.n_partitions, dt, KERNEL_NAME)

    bw, layers, makespan, total_bytes = run_kernel(
        flops, bytes_, compute, start_times, plan.passes, machine.peak_bw, dt, sim.record_trace, start_layers,
        bw_cap=partition_bw_cap(machine, plan))
    return SimTrace(
        dt=dt,
        aggregate_bw=bw,
        layers=layers,
        makespan=makespan,
        total_bytes=total_bytes,
        total_flops=float(flops.sum()) * plan.n_partitions * plan.passes,
        n_layers=len(traffic),
        offsets=offsets,
        start_layers=start_layers,
    )


def expected_bytes(model: CnnModel, machine: MachineConfig, plan: PartitionPlan,
                   policy: ReusePolicy = ReusePolicy()) -> float:
    """DRAM bytes the whole run must move: every partition, every pass."""
    per_pass = sum(t.bytes_total for t in pass_traffic(model, machine, plan, policy))
    return float(per_pass) * plan.n_partitions * plan.passes
