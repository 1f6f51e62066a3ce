"""Accelerator description, partitioning plans and DRAM capacity checks."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TextIO

from .workload import CnnModel, model_costs

MACHINE_KEYS = ("cores", "flops_per_core", "peak_bw", "llc_bytes", "dram_bytes", "element_size")
# optional: per-core bandwidth ceiling in bytes/s; absent means unlimited
OPTIONAL_KEYS = ("core_bw",)

# Calibrated so the bundled VGG-16 stops fitting in 16 GiB past 8 partitions
# while ResNet-50 and GoogleNet still fit at 16 (see README, "Capacity").
DEFAULT_WORKSPACE_FACTOR = 6.0


class MachineFormatError(ValueError):
    pass


@dataclass(frozen=True)
class MachineConfig:
    cores: int
    flops_per_core: float
    peak_bw: float
    llc_bytes: int
    dram_bytes: int
    element_size: int = 4
    core_bw: float = math.inf

    def __post_init__(self):
        for key in MACHINE_KEYS + OPTIONAL_KEYS:
            if not getattr(self, key) > 0:
                raise ValueError(f"machine field {key} must be > 0, got {getattr(self, key)!r}")

    @property
    def peak_compute(self) -> float:
        return self.cores * self.flops_per_core

    def partition_bw_cap(self, cores: int) -> float:
        """Most bandwidth ``cores`` cores can draw together, before the shared channel limit."""
        return cores * self.core_bw

    def with_cores(self, cores: int) -> "MachineConfig":
        return replace(self, cores=cores)


def parse_machine(source: TextIO | str, origin: str | None = None) -> MachineConfig:
    """Parse ``key=value`` lines.

    Every key in MACHINE_KEYS is required exactly once; ``core_bw`` may be given.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    prefix = f"{origin}:" if origin else "line "
    values: dict[str, int] = {}
    for lineno, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise MachineFormatError(f"{prefix}{lineno}: expected key=value, got {line!r}")
        if key not in MACHINE_KEYS and key not in OPTIONAL_KEYS:
            raise MachineFormatError(f"{prefix}{lineno}: unknown key {key!r}")
        if key in values:
            raise MachineFormatError(f"{prefix}{lineno}: duplicate key {key!r}")
        try:
            values[key] = int(value)
        except ValueError:
            raise MachineFormatError(f"{prefix}{lineno}: {key} is not a decimal integer: {value!r}") from None
    missing = [k for k in MACHINE_KEYS if k not in values]
    if missing:
        raise MachineFormatError(f"{origin or 'machine config'}: missing keys {', '.join(missing)}")
    try:
        return MachineConfig(**values)
    except ValueError as exc:
        raise MachineFormatError(f"{origin or 'machine config'}: {exc}") from None


def load_machine(path: str | Path) -> MachineConfig:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_machine(fh, origin=str(path))


def format_machine(machine: MachineConfig) -> str:
    keys = MACHINE_KEYS + tuple(k for k in OPTIONAL_KEYS if math.isfinite(getattr(machine, k)))
    return "".join(f"{k}={int(getattr(machine, k))}\n" for k in keys)


class StaggerKind(str, Enum):
    NONE = "none"
    UNIFORM = "uniform"
    RANDOM = "random"


@dataclass(frozen=True)
class Stagger:
    kind: StaggerKind = StaggerKind.UNIFORM
    seed: int = 42

    def __post_init__(self):
        object.__setattr__(self, "kind", StaggerKind(self.kind))
        if not 0 <= self.seed < 2**64:
            raise ValueError("stagger seed must fit in an unsigned 64-bit integer")

    @classmethod
    def none(cls) -> "Stagger":
        return cls(StaggerKind.NONE)

    @classmethod
    def uniform(cls) -> "Stagger":
        return cls(StaggerKind.UNIFORM)

    @classmethod
    def random(cls, seed: int) -> "Stagger":
        return cls(StaggerKind.RANDOM, seed)


@dataclass(frozen=True)
class PartitionPlan:
    n_partitions: int = 1
    images_per_pass_total: int = 64
    passes: int = 4
    stagger: Stagger = Stagger()

    def __post_init__(self):
        if self.n_partitions < 1 or self.images_per_pass_total < 1 or self.passes < 1:
            raise ValueError("n_partitions, images_per_pass_total and passes must all be >= 1")
        if self.images_per_pass_total % self.n_partitions:
            raise ValueError(
                f"{self.n_partitions} partitions do not evenly split {self.images_per_pass_total} images per pass")

    @property
    def batch_per_partition(self) -> int:
        return self.images_per_pass_total // self.n_partitions

    @property
    def images_total(self) -> int:
        return self.images_per_pass_total * self.passes

    def validate_for(self, machine: MachineConfig) -> None:
        if machine.cores % self.n_partitions:
            raise ValueError(f"{self.n_partitions} partitions do not evenly split {machine.cores} cores")


def partition_compute(machine: MachineConfig, plan: PartitionPlan) -> float:
    plan.validate_for(machine)
    return (machine.cores // plan.n_partitions) * machine.flops_per_core


def partition_bw_cap(machine: MachineConfig, plan: PartitionPlan) -> float:
    plan.validate_for(machine)
    return machine.partition_bw_cap(machine.cores // plan.n_partitions)


@dataclass(frozen=True)
class CapacityReport:
    weight_bytes_total: int
    workspace_bytes_per_partition: int
    n_partitions: int
    dram_bytes: int

    @property
    def dram_needed(self) -> int:
        return self.weight_bytes_total + self.n_partitions * self.workspace_bytes_per_partition

    @property
    def feasible(self) -> bool:
        return self.dram_needed <= self.dram_bytes

    def describe(self) -> str:
        gib = 2**30
        verdict = "feasible" if self.feasible else "INFEASIBLE"
        return (
            f"partitions:              {self.n_partitions}\n"
            f"weights resident:        {self.weight_bytes_total} B ({self.weight_bytes_total / gib:.3f} GiB)\n"
            f"workspace per partition: {self.workspace_bytes_per_partition} B "
            f"({self.workspace_bytes_per_partition / gib:.3f} GiB)\n"
            f"dram needed:             {self.dram_needed} B ({self.dram_needed / gib:.3f} GiB)\n"
            f"dram available:          {self.dram_bytes} B ({self.dram_bytes / gib:.3f} GiB)\n"
            f"verdict:                 {verdict}\n"
        )


def check_capacity(
    model: CnnModel,
    machine: MachineConfig,
    plan: PartitionPlan,
    workspace_factor: float = DEFAULT_WORKSPACE_FACTOR,
    replicate_weights: bool = True,
) -> CapacityReport:
    """DRAM footprint of running ``plan``.

    Each partition runs its own inference instance and keeps its own weight
    copy unless ``replicate_weights`` is False, in which case weights are
    counted once. Workspace scales with the partition batch and the largest
    single-layer activation footprint.
    """
    if workspace_factor < 1:
        raise ValueError("workspace_factor must be >= 1")
    plan.validate_for(machine)
    costs = model_costs(model, machine.element_size)
    weights = sum(c.weight_bytes for c in costs)
    if replicate_weights:
        weights *= plan.n_partitions
    peak_act = max(c.act_bytes_per_image for c in costs)
    workspace = int(round(workspace_factor * plan.batch_per_partition * peak_act))
    return CapacityReport(weights, workspace, plan.n_partitions, machine.dram_bytes)


class CapacityError(RuntimeError):
    def __init__(self, report: CapacityReport):
        self.report = report
        super().__init__(
            f"plan does not fit in DRAM: needs {report.dram_needed} bytes, "
            f"machine has {report.dram_bytes} bytes")
