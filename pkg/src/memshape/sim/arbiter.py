"""Shared-bandwidth arbitration and partition start staggering."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..machine import PartitionPlan, StaggerKind


def allocate_bandwidth(demands: Sequence[float], peak: float) -> list[float]:
    """Max-min fair (water-filling) split of ``peak`` among ``demands``.

    Demands below the water level are met in full; everyone else gets the
    level. Under-subscribed requests are returned unchanged.
    """
    if peak <= 0:
        raise ValueError("peak must be > 0")
    if any(d < 0 for d in demands):
        raise ValueError("demands must be >= 0")
    alloc = [float(d) for d in demands]
    if sum(alloc) <= peak:
        return alloc
    remaining = float(peak)
    left = len(alloc)
    order = sorted(range(len(alloc)), key=alloc.__getitem__)
    for pos, i in enumerate(order):
        level = remaining / left
        if alloc[i] <= level:
            remaining -= alloc[i]
            left -= 1
            continue
        for j in order[pos:]:
            alloc[j] = level
        break
    return alloc


def stagger_offsets(plan: PartitionPlan, pass_time_estimate: float) -> list[float]:
    """Start time of each partition, in seconds."""
    if pass_time_estimate <= 0:
        raise ValueError("pass_time_estimate must be > 0")
    n = plan.n_partitions
    kind = plan.stagger.kind
    if kind is StaggerKind.NONE:
        return [0.0] * n
    if kind is StaggerKind.UNIFORM:
        return [i / n * pass_time_estimate for i in range(n)]
    rng = np.random.default_rng(plan.stagger.seed)
    return [float(x) for x in rng.uniform(0.0, pass_time_estimate, size=n)]
