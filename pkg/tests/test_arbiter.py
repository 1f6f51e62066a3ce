import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memshape.machine import PartitionPlan, Stagger
from memshape.sim import allocate_bandwidth, stagger_offsets
from memshape.sim.engine import _ckernel

from .oracles import waterfill_bruteforce

IMPLS = [pytest.param(allocate_bandwidth, id="python")]
if _ckernel is not None:
    IMPLS.append(pytest.param(lambda d, p: list(_ckernel.waterfill(np.asarray(d, float), p)), id="cython"))


@pytest.mark.parametrize("alloc", IMPLS)
@pytest.mark.parametrize("demands, peak, expected", [
    ([100, 100], 400, [100, 100]),
    ([300, 300], 400, [200, 200]),
    ([500, 100, 200], 400, [150, 100, 150]),
    ([], 400, []),
    ([0, 0, 1000], 10, [0, 0, 10]),
])
def test_examples(alloc, demands, peak, expected):
    assert list(alloc(demands, peak)) == pytest.approx(expected, rel=1e-12)


def test_oracle_finds_level_150():
    assert list(waterfill_bruteforce([500, 100, 200], 400)) == pytest.approx([150, 100, 150], rel=1e-12)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        allocate_bandwidth([1], 0)
    with pytest.raises(ValueError):
        allocate_bandwidth([-1], 10)


demand_lists = st.lists(st.floats(0, 1e12, allow_nan=False), min_size=1, max_size=24)


@pytest.mark.parametrize("alloc", IMPLS)
@settings(max_examples=300, deadline=None)
@given(demands=demand_lists, peak=st.floats(1.0, 1e12))
def test_properties(alloc, demands, peak):
    a = np.asarray(alloc(demands, peak))
    d = np.asarray(demands)
    tol = 1e-9 * max(peak, d.max())
    assert a.sum() <= peak + tol
    assert np.all(a <= d + tol)
    if d.sum() <= peak:
        assert np.array_equal(a, d)
    else:
        assert a.sum() == pytest.approx(peak, rel=1e-9)
        short = a < d - tol
        if short.any():
            assert a[short].min() >= a.max() - tol
    assert np.allclose(a, waterfill_bruteforce(d, peak), rtol=1e-9, atol=1e-9 * peak)


@settings(max_examples=200, deadline=None)
@given(demands=demand_lists, peak=st.floats(1.0, 1e12))
def test_compiled_waterfill_matches_python(demands, peak):
    if _ckernel is None:
        pytest.skip("extension not built")
    c = _ckernel.waterfill(np.asarray(demands, float), peak)
    assert np.allclose(c, allocate_bandwidth(demands, peak), rtol=1e-12, atol=0)


def test_stagger_examples():
    assert stagger_offsets(PartitionPlan(4, 64, stagger=Stagger.none()), 3.0) == [0, 0, 0, 0]
    assert stagger_offsets(PartitionPlan(4, 64), 1.0) == [0, 0.25, 0.5, 0.75]
    plan = PartitionPlan(8, 64, stagger=Stagger.random(7))
    first = stagger_offsets(plan, 2.0)
    assert first == stagger_offsets(plan, 2.0)
    assert all(0 <= x < 2.0 for x in first)
    assert first != stagger_offsets(PartitionPlan(8, 64, stagger=Stagger.random(8)), 2.0)


def test_stagger_needs_positive_estimate():
    with pytest.raises(ValueError):
        stagger_offsets(PartitionPlan(), 0.0)
