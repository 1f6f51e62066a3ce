# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel; same contract and arithmetic order as _pykernel.run."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef double _DONE_RTOL = 1e-12


cdef void _waterfill(double* demand, double* alloc, int* order, int n, double peak) noexcept nogil:
    cdef int i, j, key, left
    cdef double total = 0.0, remaining, level
    for i in range(n):
        alloc[i] = demand[i]
        total += demand[i]
    if total <= peak:
        return
    for i in range(n):
        order[i] = i
    # insertion sort: n is the partition count, small
    for i in range(1, n):
        key = order[i]
        j = i - 1
        while j >= 0 and demand[order[j]] > demand[key]:
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = key
    remaining = peak
    left = n
    for i in range(n):
        level = remaining / left
        if demand[order[i]] <= level:
            remaining -= demand[order[i]]
            left -= 1
            continue
        for j in range(i, n):
            alloc[order[j]] = level
        break


def waterfill(demands, double peak):
    """Compiled arbiter, exposed for cross-checking against the Python one."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] d = np.ascontiguousarray(demands, dtype=np.float64)
    cdef int n = d.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef int* order = <int*> malloc(max(n, 1) * sizeof(int))
    try:
        _waterfill(&d[0] if n else NULL, &out[0] if n else NULL, order, n, peak)
    finally:
        free(order)
    return [float(x) for x in out]


cdef struct State:
    int n_layers
    int n_parts
    int passes
    double compute
    double bw_cap
    double peak
    double dt
    long max_steps


cdef long _run(State s, double* F, double* B, double* offsets, long long* start_pos, double* step_bytes_out,
               long long* counters, bint record, double* makespan_out, double* total_out) noexcept nogil:
    cdef int n_layers = s.n_layers, n_parts = s.n_parts
    cdef long long* pos = <long long*> malloc(n_parts * sizeof(long long))
    cdef long long* end_pos = <long long*> malloc(n_parts * sizeof(long long))
    cdef int* started = <int*> malloc(n_parts * sizeof(int))
    cdef int* done = <int*> malloc(n_parts * sizeof(int))
    cdef int* active = <int*> malloc(n_parts * sizeof(int))
    cdef int* order = <int*> malloc(n_parts * sizeof(int))
    cdef double* frac = <double*> malloc(n_parts * sizeof(double))
    cdef double* demand = <double*> malloc(n_parts * sizeof(double))
    cdef double* alloc = <double*> malloc(n_parts * sizeof(double))
    cdef double* rate = <double*> malloc(n_parts * sizeof(double))
    cdef double* tau = <double*> malloc(n_parts * sizeof(double))
    cdef int p, k, l, n_active, n_done = 0
    cdef long step = 0
    cdef double t0, elapsed, now, h, f, b, r, step_bytes, total = 0.0, makespan = 0.0

    for p in range(n_parts):
        pos[p] = start_pos[p]
        end_pos[p] = start_pos[p] + <long long> s.passes * n_layers
        started[p] = 0
        done[p] = 0
        frac[p] = 0.0

    while n_done < n_parts:
        if step >= s.max_steps:
            step = -1
            break
        t0 = step * s.dt
        if record:
            for p in range(n_parts):
                if offsets[p] <= t0 and not done[p]:
                    counters[step * n_parts + p] = pos[p]
                else:
                    counters[step * n_parts + p] = -1
        elapsed = 0.0
        step_bytes = 0.0
        while elapsed < s.dt * (1.0 - 1e-12) and n_done < n_parts:
            now = t0 + elapsed
            h = s.dt - elapsed
            n_active = 0
            for p in range(n_parts):
                if done[p]:
                    continue
                if not started[p]:
                    if offsets[p] <= now:
                        started[p] = 1
                    else:
                        if offsets[p] - now < h:
                            h = offsets[p] - now
                        continue
                active[n_active] = p
                n_active += 1

            for k in range(n_active):
                p = active[k]
                l = <int> (pos[p] % n_layers)
                f = F[l]
                b = B[l]
                demand[k] = s.compute * b / f if b > 0.0 else 0.0
                if demand[k] > s.bw_cap:
                    demand[k] = s.bw_cap
            if n_active:
                _waterfill(demand, alloc, order, n_active, s.peak)

            for k in range(n_active):
                p = active[k]
                l = <int> (pos[p] % n_layers)
                f = F[l]
                b = B[l]
                if demand[k] == 0.0:
                    r = s.compute
                else:
                    r = alloc[k] * f / b
                    if r > s.compute:
                        r = s.compute
                rate[k] = r
                tau[k] = (1.0 - frac[p]) * f / r
                if tau[k] < h:
                    h = tau[k]

            for k in range(n_active):
                p = active[k]
                l = <int> (pos[p] % n_layers)
                f = F[l]
                b = B[l]
                if tau[k] <= h * (1.0 + _DONE_RTOL):
                    step_bytes += (1.0 - frac[p]) * b
                    frac[p] = 0.0
                    pos[p] += 1
                    if pos[p] == end_pos[p]:
                        done[p] = 1
                        n_done += 1
                else:
                    step_bytes += rate[k] * h * b / f
                    frac[p] += rate[k] * h / f
            elapsed += h
            if n_done == n_parts:
                makespan = t0 + elapsed
        step_bytes_out[step] = step_bytes
        total += step_bytes
        step += 1

    free(pos); free(end_pos); free(started); free(done); free(active); free(order)
    free(frac); free(demand); free(alloc); free(rate); free(tau)
    makespan_out[0] = makespan
    total_out[0] = total
    return step


def run(F, B, double compute, double bw_cap, offsets, start_pos, int passes, double peak, double dt, bint record, long max_steps):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f_arr = np.ascontiguousarray(F, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_arr = np.ascontiguousarray(B, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] off = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] spos = np.ascontiguousarray(start_pos, dtype=np.int64)
    cdef State s
    s.n_layers = f_arr.shape[0]
    s.n_parts = off.shape[0]
    s.passes = passes
    s.compute = compute
    s.bw_cap = bw_cap
    s.peak = peak
    s.dt = dt
    s.max_steps = max_steps
    cdef cnp.ndarray[cnp.float64_t, ndim=1] step_bytes = np.zeros(max_steps, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] counters = np.zeros(
        (max_steps if record else 1, s.n_parts), dtype=np.int64)
    cdef double makespan = 0.0, total = 0.0
    cdef long n_steps
    with nogil:
        n_steps = _run(s, &f_arr[0], &b_arr[0], &off[0], <long long*> &spos[0], &step_bytes[0],
                       <long long*> &counters[0, 0], record, &makespan, &total)
    if n_steps < 0:
        raise RuntimeError(f"simulation exceeded {max_steps} steps")
    bw = step_bytes[:n_steps] / dt
    layers = counters[:n_steps].copy() if record else np.empty((0, s.n_parts), np.int64)
    return bw, layers, makespan, total
