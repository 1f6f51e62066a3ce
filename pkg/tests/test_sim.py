import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memshape.machine import CapacityError, MachineConfig, PartitionPlan, Stagger
from memshape.sim import SimConfig, StaggerMode, expected_bytes, run_kernel, simulate
from memshape.sim import _pykernel
from memshape.sim.engine import _ckernel, auto_dt, phase_start_layers
from memshape.traffic import ReusePolicy

from .oracles import roofline_time

KERNELS = [pytest.param(_pykernel, id="python")]
if _ckernel is not None:
    KERNELS.append(pytest.param(_ckernel, id="cython"))


@pytest.fixture(params=KERNELS)
def impl(request):
    return request.param


@pytest.mark.parametrize("F, B", [(6e12, 1e9), (1e9, 4e11)])
def test_roofline_examples(impl, F, B):
    dt = 1e-3
    _, _, makespan, total = run_kernel([F], [B], 6e12, [0.0], 1, 4e11, dt, impl=impl)
    assert abs(makespan - 1.0) <= 2 * dt
    assert total == pytest.approx(B, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e6, 1e13), st.just(0.0) | st.floats(1.0, 1e12), st.floats(1e9, 1e13), st.floats(1e9, 1e12))
def test_roofline_property(F, B, C, peak):
    t = roofline_time(F, B, C, peak)
    dt = t / 500
    _, _, makespan, _ = run_kernel([F], [B], C, [0.0], 1, peak, dt)
    assert abs(makespan - t) <= 2 * dt


def test_identical_partitions_move_in_lockstep(resnet, knl):
    plan = PartitionPlan(2, 64, 1, Stagger.none())
    trace = simulate(resnet, knl, plan, sim=SimConfig(min_steps=2000))
    assert np.array_equal(trace.layers[:, 0], trace.layers[:, 1])


def test_samples_capped_and_bytes_conserved(models, knl):
    for name, model in models.items():
        plan = PartitionPlan(4, 64, 2)
        trace = simulate(model, knl, plan, sim=SimConfig(min_steps=4000))
        assert trace.aggregate_bw.max() <= knl.peak_bw * (1 + 1e-6), name
        want = expected_bytes(model, knl, plan)
        assert abs(trace.total_bytes - want) <= 1e-9 * want
        assert abs(trace.aggregate_bw.sum() * trace.dt - want) <= 1e-9 * want


def test_partition_cap_limits_samples(resnet, knl):
    trace = simulate(resnet, knl, PartitionPlan(1, 64, 1), sim=SimConfig(min_steps=2000))
    cap = knl.partition_bw_cap(knl.cores)
    assert trace.aggregate_bw.max() <= min(cap, knl.peak_bw) * (1 + 1e-6)


def test_bw_cap_slows_memory_bound_layer(impl):
    _, _, makespan, _ = run_kernel([1e9], [4e11], 6e12, [0.0], 1, 4e11, 1e-3, bw_cap=2e11, impl=impl)
    assert makespan == pytest.approx(2.0, abs=2e-3)


def test_layer_counter_and_idle_markers(impl):
    bw, layers, makespan, _ = run_kernel([1.0, 1.0], [0.0, 0.0], 1.0, [0.0, 1.0], 2, 1.0, 0.25, impl=impl)
    assert makespan == pytest.approx(5.0)
    # delayed partition reports -1 until it starts; finished partitions report -1
    assert list(layers[:, 1][:4]) == [-1, -1, -1, -1]
    assert list(layers[:, 0]) == [0] * 4 + [1] * 4 + [2] * 4 + [3] * 4 + [-1] * 4
    assert list(layers[:, 1][4:]) == [0] * 4 + [1] * 4 + [2] * 4 + [3] * 4
    assert not bw.any()


def test_phase_start_wraps_around(impl):
    # starts on layer 1, runs 1,2,3 then the skipped layer 0
    _, layers, makespan, _ = run_kernel([1.0, 1.0, 1.0], [0.0] * 3, 1.0, [0.0], 1, 1.0, 0.5, start_layers=[1],
                                        impl=impl)
    assert makespan == pytest.approx(3.0)
    assert list(layers[:, 0]) == [1, 1, 2, 2, 3, 3]


def test_phase_start_layers():
    flops = np.array([1.0, 2.0, 3.0])
    assert phase_start_layers(flops, 1.0, [0.0, 0.99, 1.0, 2.5, 5.99, 7.0]) == [0, 0, 1, 1, 2, 2]


def test_unlimited_bandwidth_is_neutral(models):
    m = MachineConfig(64, 93_750_000_000, 10**18, 33_554_432, 16 * 2**30)
    for name, model in models.items():
        base = None
        for n in (1, 2, 4, 8):
            for stagger in (Stagger.none(), Stagger.uniform(), Stagger.random(3)):
                plan = PartitionPlan(n, 64, 2, stagger)
                trace = simulate(model, m, plan, sim=SimConfig(min_steps=2000), workspace_factor=1.0)
                compute = sum(f for f in _pass_flops(model, m, plan)) / (m.peak_compute / n)
                tol = 2 * trace.dt * trace.n_layers
                assert abs(trace.makespan - plan.passes * compute) <= tol, (name, n, stagger)
                base = base or trace.makespan
                assert trace.makespan == pytest.approx(base, rel=0.01)


def _pass_flops(model, machine, plan):
    from memshape.traffic import pass_traffic
    return [t.flops_total for t in pass_traffic(model, machine, plan, ReusePolicy())]


def test_delay_mode_starts_late(resnet, knl):
    plan = PartitionPlan(4, 64, 1)
    trace = simulate(resnet, knl, plan, sim=SimConfig(min_steps=2000, stagger_mode=StaggerMode.DELAY))
    first_step = [int(np.argmax(trace.layers[:, p] >= 0)) for p in range(4)]
    assert first_step[0] == 0
    assert first_step == sorted(first_step) and first_step[3] > first_step[1] > 0
    assert trace.start_layers == [0, 0, 0, 0]


def test_determinism(resnet, knl):
    plan = PartitionPlan(8, 64, 2, Stagger.random(11))
    a = simulate(resnet, knl, plan, sim=SimConfig(min_steps=2000))
    b = simulate(resnet, knl, plan, sim=SimConfig(min_steps=2000))
    assert a.aggregate_bw.tobytes() == b.aggregate_bw.tobytes()
    assert np.array_equal(a.layers, b.layers)
    assert a.makespan == b.makespan


@pytest.mark.skipif(_ckernel is None, reason="extension not built")
@pytest.mark.parametrize("n", [1, 4])
def test_kernels_agree(models, knl, n):
    from memshape.traffic import pass_traffic
    from memshape.machine import partition_bw_cap, partition_compute
    model = models["googlenet"]
    plan = PartitionPlan(n, 64, 1)
    traffic = pass_traffic(model, knl, plan, ReusePolicy())
    F = [t.flops_total for t in traffic]
    B = [t.bytes_total for t in traffic]
    C = partition_compute(knl, plan)
    est = sum(F) / C
    offs = [i * est / n for i in range(n)]
    args = (F, B, C, offs, 1, knl.peak_bw, est / 500)
    kw = dict(bw_cap=partition_bw_cap(knl, plan))
    py = run_kernel(*args, impl=_pykernel, **kw)
    cy = run_kernel(*args, impl=_ckernel, **kw)
    assert np.allclose(py[0], cy[0], rtol=1e-9, atol=1e-6 * knl.peak_bw * 1e-6)
    assert np.array_equal(py[1], cy[1])
    assert py[2] == pytest.approx(cy[2], rel=1e-12)
    assert py[3] == pytest.approx(cy[3], rel=1e-12)


def test_errors(models, knl):
    with pytest.raises(ValueError, match="dt"):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError, match="dt"):
        run_kernel([1.0], [1.0], 1.0, [0.0], 1, 1.0, -1.0)
    with pytest.raises(ValueError, match="flops"):
        run_kernel([0.0], [1.0], 1.0, [0.0], 1, 1.0, 1.0)
    with pytest.raises(CapacityError, match="needs .* bytes"):
        simulate(models["vgg16"], knl, PartitionPlan(16, 64))


def test_auto_dt():
    assert auto_dt(1.0, 10) == 1.0 / 2000
    # floored so a 4-pass run still takes 10,000 steps
    assert auto_dt(1.0, 4) == 4.0 / 10_000


def test_step_count_meets_floor(resnet, knl):
    trace = simulate(resnet, knl, PartitionPlan(1, 64, 4))
    assert trace.n_steps >= 10_000
    assert math.isclose(trace.times[-1], (trace.n_steps - 1) * trace.dt)
