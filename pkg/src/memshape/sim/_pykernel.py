"""Pure-Python stepping kernel. Reference for (and fallback to) ``_ckernel``.

Within a step the kernel advances from event to event (a layer finishing or
a partition starting), re-arbitrating bandwidth at each event, so rates are
exact and never exceed the allocation. Samples are averaged over the step.
"""

import numpy as np

from .arbiter import allocate_bandwidth

# a layer counts as finished when its remaining time is within this
# relative margin of the chosen sub-step
_DONE_RTOL = 1e-12


def run(F, B, compute, bw_cap, offsets, start_pos, passes, peak, dt, record, max_steps):
    F = [float(x) for x in F]
    B = [float(x) for x in B]
    offsets = [float(x) for x in offsets]
    n_layers = len(F)
    n_parts = len(offsets)
    # pos: global layer counter (pass * n_layers + layer), run until end_pos
    pos = [int(s) for s in start_pos]
    end_pos = [s + passes * n_layers for s in pos]
    frac = [0.0] * n_parts
    started = [False] * n_parts
    done = [False] * n_parts
    n_done = 0
    makespan = 0.0
    total_bytes = 0.0

    step_bytes_out = []
    counters = [] if record else None
    step = 0
    while n_done < n_parts:
        if step >= max_steps:
            raise RuntimeError(f"simulation exceeded {max_steps} steps")
        t0 = step * dt
        if record:
            counters.append([
                pos[p] if (offsets[p] <= t0 and not done[p]) else -1
                for p in range(n_parts)
            ])
        elapsed = 0.0
        step_bytes = 0.0
        while elapsed < dt * (1.0 - 1e-12) and n_done < n_parts:
            now = t0 + elapsed
            h = dt - elapsed
            active = []
            for p in range(n_parts):
                if done[p]:
                    continue
                if not started[p]:
                    if offsets[p] <= now:
                        started[p] = True
                    else:
                        h = min(h, offsets[p] - now)
                        continue
                active.append(p)

            demands = []
            for p in active:
                f, b = F[pos[p] % n_layers], B[pos[p] % n_layers]
                demands.append(min(compute * b / f, bw_cap) if b > 0.0 else 0.0)
            alloc = allocate_bandwidth(demands, peak) if active else []

            rates = []
            taus = []
            for k, p in enumerate(active):
                f, b = F[pos[p] % n_layers], B[pos[p] % n_layers]
                # zero demand (no bytes, or too few to register) runs compute-bound
                r = compute if demands[k] == 0.0 else min(compute, alloc[k] * f / b)
                tau = (1.0 - frac[p]) * f / r
                rates.append(r)
                taus.append(tau)
                if tau < h:
                    h = tau

            for k, p in enumerate(active):
                f, b = F[pos[p] % n_layers], B[pos[p] % n_layers]
                if taus[k] <= h * (1.0 + _DONE_RTOL):
                    step_bytes += (1.0 - frac[p]) * b
                    frac[p] = 0.0
                    pos[p] += 1
                    if pos[p] == end_pos[p]:
                        done[p] = True
                        n_done += 1
                else:
                    step_bytes += rates[k] * h * b / f
                    frac[p] += rates[k] * h / f
            elapsed += h
            if n_done == n_parts:
                makespan = t0 + elapsed
        step_bytes_out.append(step_bytes)
        total_bytes += step_bytes
        step += 1

    bw = np.asarray(step_bytes_out, dtype=np.float64) / dt
    layers = np.asarray(counters, dtype=np.int64).reshape(-1, n_parts) if record else np.empty((0, n_parts), np.int64)
    return bw, layers, makespan, total_bytes
