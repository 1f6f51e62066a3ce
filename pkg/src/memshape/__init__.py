"""Simulate statistical memory traffic shaping on a partitioned manycore CNN accelerator."""

from .machine import (CapacityError, CapacityReport, MachineConfig, PartitionPlan, Stagger, StaggerKind,
                      check_capacity, load_machine, parse_machine, partition_compute)
from .traffic import LayerTraffic, ReusePolicy, WeightMode, layer_traffic, pass_traffic
from .workload import (CnnModel, LayerCost, LayerKind, LayerSpec, ModelFormatError, layer_cost, load_model,
                       parse_model, weight_traffic_ratio)

__version__ = "0.1.0"
