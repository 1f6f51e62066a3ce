"""Simulation engine.

The stepping kernel is compiled from ``_ckernel.pyx`` when the extension is
built; otherwise (or with ``MEMSHAPE_PURE_PYTHON=1`` set before import) the
pure-Python ``_pykernel`` runs the same algorithm.
"""

from .arbiter import allocate_bandwidth, stagger_offsets
from .engine import (KERNEL_NAME, SimConfig, SimTrace, StaggerMode, auto_dt, expected_bytes, pass_time_estimate,
                     run_kernel, simulate)

__all__ = [
    "KERNEL_NAME",
    "SimConfig",
    "SimTrace",
    "StaggerMode",
    "allocate_bandwidth",
    "auto_dt",
    "expected_bytes",
    "pass_time_estimate",
    "run_kernel",
    "simulate",
    "stagger_offsets",
]
