"""Per-pass DRAM traffic of one partition under simple cache-reuse rules.

The last-level cache is split evenly between partitions, so partitioning
shrinks the share each partition can use to keep weights resident. That is
the reuse penalty traded against smoother bandwidth demand.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .machine import MachineConfig, PartitionPlan
from .workload import CnnModel, LayerCost, LayerSpec, layer_cost


class WeightMode(str, Enum):
    FIT_ONCE = "fit_once"
    RELOAD_PER_IMAGE = "reload_per_image"


@dataclass(frozen=True)
class ReusePolicy:
    weight_mode: WeightMode = WeightMode.FIT_ONCE
    producer_consumer: bool = False
    write_outputs_always: bool = True

    def __post_init__(self):
        object.__setattr__(self, "weight_mode", WeightMode(self.weight_mode))


@dataclass(frozen=True)
class LayerTraffic:
    layer_index: int
    flops_total: int
    weight_bytes_component: int
    activation_bytes_component: int

    @property
    def bytes_total(self) -> int:
        return self.weight_bytes_component + self.activation_bytes_component

    @property
    def intensity(self) -> float:
        """flops per DRAM byte (inf when the layer touches no DRAM)."""
        if self.bytes_total == 0:
            return float("inf")
        return self.flops_total / self.bytes_total


def layer_traffic(
    layer: LayerSpec,
    cost: LayerCost,
    batch: int,
    llc_share: float,
    policy: ReusePolicy,
    prev_out_footprint: int | None = None,
    layer_index: int = 0,
) -> LayerTraffic:
    """DRAM traffic of ``layer`` over one batch.

    ``prev_out_footprint`` is the previous layer's output bytes for the whole
    batch; None means the input comes from outside (always read from DRAM).
    """
    if batch < 1:
        raise ValueError("batch must be >= 1")
    if llc_share <= 0:
        raise ValueError("llc_share must be > 0")
    if policy.weight_mode is WeightMode.FIT_ONCE and cost.weight_bytes <= llc_share:
        weight = cost.weight_bytes
    else:
        weight = cost.weight_bytes * batch

    if policy.producer_consumer and prev_out_footprint is not None and prev_out_footprint <= llc_share:
        act_in = 0
    else:
        act_in = batch * cost.in_act_bytes_per_image

    act_out = batch * cost.out_act_bytes_per_image
    if not policy.write_outputs_always and act_out <= llc_share:
        act_out = 0

    return LayerTraffic(layer_index, cost.flops_per_image * batch, weight, act_in + act_out)


def pass_traffic(
    model: CnnModel,
    machine: MachineConfig,
    plan: PartitionPlan,
    policy: ReusePolicy,
) -> list[LayerTraffic]:
    """Traffic of one pass of one partition, layer by layer."""
    plan.validate_for(machine)
    batch = plan.batch_per_partition
    llc_share = machine.llc_bytes / plan.n_partitions
    out = []
    prev_footprint = None
    for i, layer in enumerate(model.layers):
        cost = layer_cost(layer, machine.element_size)
        out.append(layer_traffic(layer, cost, batch, llc_share, policy, prev_footprint, i))
        prev_footprint = batch * cost.out_act_bytes_per_image
    return out
