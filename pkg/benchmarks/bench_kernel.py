"""Time the compiled stepping kernel against the pure-Python one.

    python3 benchmarks/bench_kernel.py [--model resnet50] [--partitions 1,4,16] [--repeat 3]

Both kernels run the same (flops, bytes) arrays; the script checks that their
makespans agree before reporting timings.
"""

import argparse
import math
import time
from pathlib import Path

import numpy as np

from memshape.machine import PartitionPlan, load_machine, partition_bw_cap, partition_compute
from memshape.sim import _pykernel, run_kernel
from memshape.sim.arbiter import stagger_offsets
from memshape.sim.engine import _ckernel, auto_dt, pass_time_estimate, phase_start_layers
from memshape.traffic import ReusePolicy, pass_traffic
from memshape.workload import load_model

ROOT = Path(__file__).resolve().parent.parent


def case(model, machine, n, passes):
    plan = PartitionPlan(n, 64, passes)
    traffic = pass_traffic(model, machine, plan, ReusePolicy())
    F = np.array([t.flops_total for t in traffic], dtype=np.float64)
    B = np.array([t.bytes_total for t in traffic], dtype=np.float64)
    C = partition_compute(machine, plan)
    est = pass_time_estimate(F, C)
    offsets = stagger_offsets(plan, est)
    return dict(flops=F, bytes_=B, compute=C, offsets=[0.0] * n, passes=passes, peak=machine.peak_bw,
                dt=auto_dt(est, passes), record=True, start_layers=phase_start_layers(F, C, offsets),
                bw_cap=partition_bw_cap(machine, plan))


def best_of(repeat, fn):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return min(times), result


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--model", default="resnet50")
    ap.add_argument("--machine", default=str(ROOT / "machines" / "knl64.cfg"))
    ap.add_argument("--partitions", default="1,4,16")
    ap.add_argument("--passes", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if _ckernel is None:
        raise SystemExit("compiled kernel not built; run `pip install -e . --no-build-isolation` first")

    model = load_model(ROOT / "models" / f"{args.model}.csv")
    machine = load_machine(args.machine)
    print(f"{args.model}, {args.passes} passes, best of {args.repeat}")
    print(f"{'parts':>5} {'steps':>7} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for n in (int(v) for v in args.partitions.split(",")):
        kw = case(model, machine, n, args.passes)
        t_py, py = best_of(args.repeat, lambda: run_kernel(**kw, impl=_pykernel))
        t_cy, cy = best_of(args.repeat, lambda: run_kernel(**kw, impl=_ckernel))
        if not math.isclose(py[2], cy[2], rel_tol=1e-9):
            raise SystemExit(f"kernels disagree at n={n}: makespan {py[2]!r} vs {cy[2]!r}")
        print(f"{n:>5} {len(cy[0]):>7} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x")


if __name__ == "__main__":
    main()
