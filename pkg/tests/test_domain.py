import json
import math

import pytest
from hypothesis import given, strategies as st

from mrphase.domain import (
    ClusterProfile,
    GroundTruthCoefficients,
    InvalidClusterError,
    InvalidWorkloadError,
    SchemaError,
    WorkloadSpec,
    derive_features,
    map_input_shares,
    wave_count,
)


def wl(**kw):
    base = dict(name="w", input_mb=2560.0, map_selectivity=0.5, reduce_selectivity=0.5, reducer_count=4)
    base.update(kw)
    return WorkloadSpec(**base)


def test_rsj_reference_features():
    f = derive_features(wl(input_mb=19584, map_selectivity=1.0, reducer_count=11), ClusterProfile(container_count=8))
    assert f.total_mappers == 153
    assert f.map_output_mb == 19584
    assert f.shuffle_per_reducer_mb == pytest.approx(1780.36, abs=0.01)
    assert f.map_waves == 20
    assert f.reduce_waves == 2


def test_zero_selectivity_emits_nothing():
    f = derive_features(wl(input_mb=128, map_selectivity=0.0, reducer_count=1), ClusterProfile())
    assert (f.total_mappers, f.map_output_mb, f.shuffle_per_reducer_mb, f.reduce_output_mb) == (1, 0, 0, 0)


def test_hand_arithmetic_example():
    f = derive_features(wl(), ClusterProfile(container_count=8))
    assert (f.total_mappers, f.map_output_mb, f.shuffle_per_reducer_mb, f.reduce_output_mb, f.map_waves) == \
        (20, 1280, 320, 640, 3)


def test_map_only_zeroes_reduce_side():
    f = derive_features(wl(reducer_count=0, reduce_selectivity=0.7), ClusterProfile())
    assert f.shuffle_per_reducer_mb == 0 and f.reduce_output_mb == 0 and f.reduce_waves == 0


@pytest.mark.parametrize("tasks,containers,waves", [(100, 20, 5), (0, 8, 0), (101, 20, 6), (1, 1, 1)])
def test_wave_count(tasks, containers, waves):
    assert wave_count(tasks, containers) == waves


def test_wave_count_rejects_empty_cluster():
    with pytest.raises(InvalidClusterError):
        wave_count(5, 0)


@given(st.integers(1, 10**6), st.integers(1, 10**4))
def test_wave_ceiling_identities(tasks, containers):
    w = wave_count(tasks, containers)
    assert w * containers >= tasks
    assert (w - 1) * containers < tasks
    assert w <= tasks


def test_remainder_block_goes_last():
    assert map_input_shares(300, 128) == [128, 128, 44]
    assert math.fsum(map_input_shares(19584, 128)) == 19584


@given(st.floats(1, 50000), st.floats(1, 5000), st.floats(0, 1), st.floats(0, 3), st.integers(0, 40))
def test_derive_features_monotone_in_input(d, extra, msel, rsel, rt):
    cluster = ClusterProfile(container_count=8)
    a = derive_features(wl(input_mb=d, map_selectivity=msel, reduce_selectivity=rsel, reducer_count=rt), cluster)
    b = derive_features(wl(input_mb=d + extra, map_selectivity=msel, reduce_selectivity=rsel, reducer_count=rt), cluster)
    for name in ("total_mappers", "map_output_mb", "shuffle_per_reducer_mb", "reduce_output_mb",
                 "map_waves", "reduce_waves"):
        assert getattr(b, name) >= getattr(a, name)


@given(st.integers(1, 400), st.sampled_from([1, 2, 4]), st.floats(0, 1), st.integers(1, 30))
def test_volumes_are_homogeneous_in_megabytes(blocks, scale, msel, rt):
    # rescaling the MB unit (input and block size together) rescales every volume and no count
    small = ClusterProfile(block_size_mb=32.0)
    big = ClusterProfile(block_size_mb=32.0 * scale)
    a = derive_features(wl(input_mb=32.0 * blocks, map_selectivity=msel, reducer_count=rt), small)
    b = derive_features(wl(input_mb=32.0 * blocks * scale, map_selectivity=msel, reducer_count=rt), big)
    assert b.total_mappers == a.total_mappers and b.map_waves == a.map_waves
    assert b.map_output_mb == pytest.approx(a.map_output_mb * scale)
    assert b.shuffle_per_reducer_mb == pytest.approx(a.shuffle_per_reducer_mb * scale)
    assert b.reduce_output_mb == pytest.approx(a.reduce_output_mb * scale)


def test_default_ground_truth():
    gt = GroundTruthCoefficients()
    assert (gt.read.slope, gt.read.intercept) == (0.01, 1.33)
    assert (gt.collect.slope, gt.collect.intercept) == (0.01, 0.97)
    assert (gt.spill.slope, gt.spill.intercept) == (0.02, 0.98)
    assert (gt.merge.slope, gt.merge.intercept) == (0.002, 4.80)
    assert (gt.shuffle.data_slope, gt.shuffle.mapper_slope, gt.shuffle.intercept) == (10.45, 579.48, 6144.6)
    assert (gt.write.slope, gt.write.intercept) == (6.94, 2139.98)


def test_negative_coefficient_rejected():
    from mrphase.domain import LinearCost
    with pytest.raises(InvalidClusterError):
        GroundTruthCoefficients(read=LinearCost(-0.1, 1.0))


@pytest.mark.parametrize("kw", [dict(container_count=0), dict(block_size_mb=100.0),
                                dict(spill_threshold=0.0), dict(spill_threshold=1.5), dict(noise_sigma=-0.1)])
def test_cluster_invariants(kw):
    with pytest.raises(InvalidClusterError):
        ClusterProfile(**kw)


@pytest.mark.parametrize("kw", [dict(input_mb=0), dict(map_selectivity=1.2), dict(reducer_count=-1),
                                dict(reduce_selectivity=-0.5)])
def test_workload_invariants(kw):
    with pytest.raises(InvalidWorkloadError):
        wl(**kw)


def test_json_round_trip():
    c = ClusterProfile(container_count=20, noise_sigma=0.0)
    assert ClusterProfile.from_dict(json.loads(json.dumps(c.to_dict()))) == c
    w = wl(design_pattern="Join")
    assert WorkloadSpec.from_dict(json.loads(json.dumps(w.to_dict()))) == w


def test_unknown_fields_rejected():
    doc = ClusterProfile().to_dict()
    doc["racks"] = 3
    with pytest.raises(SchemaError, match="racks"):
        ClusterProfile.from_dict(doc)
    doc = ClusterProfile().to_dict()
    doc["ground_truth"]["read"]["offset"] = 1
    with pytest.raises(SchemaError, match="offset"):
        ClusterProfile.from_dict(doc)
    with pytest.raises(SchemaError, match="colour"):
        WorkloadSpec.from_dict({**wl().to_dict(), "colour": "red"})


def test_only_fifo_supported():
    with pytest.raises(InvalidClusterError):
        ClusterProfile.from_dict({"scheduler": "FAIR"})
