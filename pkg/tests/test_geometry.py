import math

import pytest

from supportbot.geometry import Aabb, Vec3, segment_aabb_min_distance, segment_intersects_aabb

from oracles import random_occlusion_configs

BOX = Aabb(Vec3(0.0, 0.0, 0.5), Vec3(0.2, 0.3, 0.5))


def test_vec3_rejects_non_finite():
    with pytest.raises(ValueError):
        Vec3(0.0, float("nan"), 0.0)
    with pytest.raises(ValueError):
        Vec3(float("inf"), 0.0, 0.0)


def test_vec3_arithmetic():
    v = Vec3(1.0, 2.0, 3.0) + Vec3(0.5, -2.0, 1.0)
    assert v == Vec3(1.5, 0.0, 4.0)
    assert Vec3(3.0, 4.0, 0.0).norm() == 5.0
    assert Vec3(0.0, 0.0, 2.0).normalized() == Vec3(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        Vec3(0.0, 0.0, 0.0).normalized()


def test_aabb_rejects_non_positive_half_extents():
    with pytest.raises(ValueError):
        Aabb(Vec3(0, 0, 0), Vec3(0.1, 0.0, 0.1))


def test_segment_through_box():
    assert segment_intersects_aabb(Vec3(-1, 0, 0.5), Vec3(1, 0, 0.5), BOX)


def test_segment_misses_box():
    assert not segment_intersects_aabb(Vec3(-1, 1, 0.5), Vec3(1, 1, 0.5), BOX)


def test_segment_axis_parallel_outside_slab():
    # Parallel to x, offset in y beyond the slab: the degenerate-direction
    # branch must reject without dividing by zero.
    assert not segment_intersects_aabb(Vec3(-1, 0.31, 0.5), Vec3(1, 0.31, 0.5), BOX)


def test_segment_endpoint_inside_box():
    assert segment_intersects_aabb(Vec3(0, 0, 0.5), Vec3(5, 5, 5), BOX)


def test_segment_stops_short_of_box():
    assert not segment_intersects_aabb(Vec3(-1, 0, 0.5), Vec3(-0.3, 0, 0.5), BOX)


def test_boundary_touch_counts_as_hit():
    assert segment_intersects_aabb(Vec3(-1, 0.3, 0.5), Vec3(1, 0.3, 0.5), BOX)


def test_inflated_box_catches_near_miss():
    a, b = Vec3(-1, 0.31, 0.5), Vec3(1, 0.31, 0.5)
    assert not segment_intersects_aabb(a, b, BOX)
    assert segment_intersects_aabb(a, b, BOX.inflated(0.02))


def test_distance_to_point():
    assert BOX.distance_to_point(Vec3(0.0, 0.0, 0.5)) == 0.0
    assert BOX.distance_to_point(Vec3(0.5, 0.0, 0.5)) == pytest.approx(0.3)
    assert BOX.distance_to_point(Vec3(0.5, 0.7, 0.5)) == pytest.approx(math.hypot(0.3, 0.4))


def test_segment_min_distance_ranks_near_vs_far():
    near = segment_aabb_min_distance(Vec3(-1, 0.4, 0.5), Vec3(1, 0.4, 0.5), BOX)
    far = segment_aabb_min_distance(Vec3(-1, 1.0, 0.5), Vec3(1, 1.0, 0.5), BOX)
    assert 0.0 < near < far
    assert segment_aabb_min_distance(Vec3(-1, 0, 0.5), Vec3(1, 0, 0.5), BOX) == 0.0


def test_slab_matches_sampling_reference_on_random_configs():
    # Smaller cousin of the acceptance-level sweep; keeps unit runs fast.
    for a, b, lo, hi, expected in random_occlusion_configs(seed=20, count=300, samples=2_000):
        box = Aabb(
            Vec3((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2),
            Vec3((hi[0] - lo[0]) / 2, (hi[1] - lo[1]) / 2, (hi[2] - lo[2]) / 2),
        )
        got = segment_intersects_aabb(Vec3(*a), Vec3(*b), box)
        assert got == expected, (a, b, lo, hi)
