import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from memshape.machine import (CapacityReport, MachineConfig, MachineFormatError, PartitionPlan, Stagger,
                              StaggerKind, check_capacity, format_machine, parse_machine, partition_compute)

MB, GB = 10**6, 10**9


def test_bundled_machine(knl):
    assert knl.cores == 64
    assert knl.peak_compute == 6e12
    assert knl.peak_bw == 4e11
    assert knl.llc_bytes == 33_554_432
    assert knl.dram_bytes == 16 * 2**30
    assert knl.element_size == 4


def test_parse_round_trip(knl):
    assert parse_machine(format_machine(knl)) == knl
    bare = MachineConfig(4, 10, 20, 30, 40)
    assert "core_bw" not in format_machine(bare)
    assert parse_machine(format_machine(bare)) == bare


@pytest.mark.parametrize("text, fragment", [
    ("cores=64\n", "missing keys"),
    ("cores 64\n", "key=value"),
    ("colors=3\n", "unknown key"),
    ("cores=1\ncores=2\n", "duplicate"),
    ("cores=6.5\n", "decimal integer"),
    ("cores=0\nflops_per_core=1\npeak_bw=1\nllc_bytes=1\ndram_bytes=1\nelement_size=4\n", "must be > 0"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(MachineFormatError, match=fragment):
        parse_machine(text)


def test_parse_error_line_number():
    with pytest.raises(MachineFormatError, match=r"line 3"):
        parse_machine("# c\ncores=64\nbogus\n")


@pytest.mark.parametrize("n, expected", [(1, 6e12), (4, 1.5e12), (64, 9.375e10)])
def test_partition_compute_examples(knl, n, expected):
    assert partition_compute(knl, PartitionPlan(n, 64)) == expected


@given(st.sampled_from([1, 2, 4, 8, 16, 32, 64]))
def test_partition_compute_sums_to_peak(n):
    m = MachineConfig(64, 93_750_000_000, 1, 1, 1)
    assert n * partition_compute(m, PartitionPlan(n, 64)) == m.peak_compute


def test_plan_validation(knl):
    with pytest.raises(ValueError, match="evenly split 64 images"):
        PartitionPlan(3, 64)
    with pytest.raises(ValueError, match=">= 1"):
        PartitionPlan(1, 64, 0)
    with pytest.raises(ValueError, match="cores"):
        PartitionPlan(128, 128).validate_for(knl)
    assert PartitionPlan(16, 64).batch_per_partition == 4
    assert PartitionPlan(4, 64, 4).images_total == 256


def test_stagger_constructors():
    assert Stagger().kind is StaggerKind.UNIFORM
    assert Stagger.none().kind is StaggerKind.NONE
    assert Stagger.random(7) == Stagger("random", 7)
    with pytest.raises(ValueError):
        Stagger("random", -1)
    with pytest.raises(ValueError):
        Stagger("sometimes")


def test_capacity_report_arithmetic():
    report = CapacityReport(100 * MB, 1 * GB, 4, 16 * GB)
    assert report.dram_needed == 4_100 * MB
    assert report.feasible
    assert not CapacityReport(100 * MB, 1 * GB, 4, 4 * GB).feasible


def test_capacity_report_describe():
    text = CapacityReport(100 * MB, 1 * GB, 4, 4 * GB).describe()
    assert "INFEASIBLE" in text and "4100000000 B" in text


def test_capacity_shared_weights_counted_once(resnet, knl):
    shared = check_capacity(resnet, knl, PartitionPlan(4, 64), replicate_weights=False)
    copies = check_capacity(resnet, knl, PartitionPlan(4, 64))
    assert copies.weight_bytes_total == 4 * shared.weight_bytes_total
    assert copies.workspace_bytes_per_partition == shared.workspace_bytes_per_partition


def test_capacity_workspace_formula(resnet, knl):
    from memshape.workload import model_costs
    peak = max(c.act_bytes_per_image for c in model_costs(resnet))
    report = check_capacity(resnet, knl, PartitionPlan(4, 64), workspace_factor=2.5)
    assert report.workspace_bytes_per_partition == 2.5 * 16 * peak


def test_capacity_vgg_limit(models, knl):
    """VGG-16 fits up to 8 partitions; ResNet-50 and GoogleNet fit at 16."""
    vgg = models["vgg16"]
    assert all(check_capacity(vgg, knl, PartitionPlan(n, 64)).feasible for n in (1, 2, 4, 8))
    assert not check_capacity(vgg, knl, PartitionPlan(16, 64)).feasible
    for name in ("resnet50", "googlenet"):
        assert check_capacity(models[name], knl, PartitionPlan(16, 64)).feasible


@pytest.mark.parametrize("name", ["resnet50", "vgg16", "googlenet"])
@pytest.mark.parametrize("replicate", [True, False])
def test_capacity_monotone_in_partitions(models, knl, name, replicate):
    needed = [check_capacity(models[name], knl, PartitionPlan(n, 64), replicate_weights=replicate).dram_needed
              for n in (1, 2, 4, 8, 16, 32, 64)]
    assert needed == sorted(needed)


def test_capacity_rejects_small_factor(resnet, knl):
    with pytest.raises(ValueError):
        check_capacity(resnet, knl, PartitionPlan(), workspace_factor=0.5)


def test_with_cores_keeps_other_fields(knl):
    m = knl.with_cores(8)
    assert m.cores == 8 and m.flops_per_core == knl.flops_per_core and m.core_bw == knl.core_bw
    assert m.partition_bw_cap(8) == 8e10
    assert math.isinf(MachineConfig(4, 1, 1, 1, 1).partition_bw_cap(4))
