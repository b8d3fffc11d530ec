"""Feature formulas against hand-computed values, plus lattice construction."""

import math

import numpy as np
import pytest

from conftest import grid_network, line_network
from crfmatch.features import (
    build_lattice,
    generative_feature,
    spatial_feature,
    temporal_feature,
    transition_weight,
)
from crfmatch.road_network import RoutePath
from crfmatch.slots import TimeSlot, slot_of
from crfmatch.trajectory_io import Trajectory


def route(distance, travel_time=1.0):
    return RoutePath(distance, travel_time, [])


# -- observation feature ------------------------------------------------------


def test_generative_zero_distance_is_one():
    assert generative_feature(0.0, 20.0) == 1.0


def test_generative_unit_offset():
    assert generative_feature(20.0, 20.0) == pytest.approx(math.exp(-1.0), abs=1e-9)


def test_generative_ratio_at_double_distance():
    got = generative_feature(20.0, 20.0) / generative_feature(40.0, 20.0)
    assert got == pytest.approx(math.exp(3.0), abs=1e-9)


def test_generative_strictly_decreasing():
    vals = [generative_feature(d, 20.0) for d in np.linspace(0, 100, 21)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(0.0 < v <= 1.0 for v in vals)


# -- spatial transition feature -----------------------------------------------


def test_spatial_straight_route_is_one():
    assert spatial_feature(100.0, route(100.0)) == pytest.approx(1.0, abs=1e-9)


def test_spatial_hand_value():
    assert spatial_feature(100.0, route(125.0)) == pytest.approx(0.64, abs=1e-9)


def test_spatial_unreachable_is_zero():
    assert spatial_feature(100.0, None) == 0.0


def test_spatial_clamps_noise_overshoot():
    assert spatial_feature(130.0, route(100.0)) == 1.0


def test_spatial_zero_length_route():
    assert spatial_feature(0.0, route(0.0)) == 1.0


def test_spatial_scale_invariance():
    for c in (0.1, 2.0, 37.5):
        assert spatial_feature(80.0 * c, route(125.0 * c)) == pytest.approx(
            spatial_feature(80.0, route(125.0)), abs=1e-12
        )


def test_spatial_nonincreasing_in_route_distance():
    vals = [spatial_feature(100.0, route(d)) for d in np.linspace(100, 400, 13)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


# -- temporal transition feature ----------------------------------------------


def test_temporal_equal_gaps_is_one():
    assert temporal_feature(60.0, 60.0) == 1.0


def test_temporal_hand_value():
    assert temporal_feature(60.0, 90.0) == pytest.approx(4.0 / 9.0, abs=1e-9)


def test_temporal_symmetry():
    assert temporal_feature(60.0, 90.0) == temporal_feature(90.0, 60.0)


def test_temporal_zero_expected_gap():
    assert temporal_feature(60.0, 0.0) == 1.0


def test_temporal_maximized_at_expected():
    expected = 120.0
    peak = temporal_feature(expected, expected)
    for dt in (30.0, 60.0, 115.0, 125.0, 240.0, 600.0):
        assert temporal_feature(dt, expected) < peak


# -- combined transition weight -----------------------------------------------


def test_transition_weight_hand_value():
    got = transition_weight(0.64, 4.0 / 9.0, 1.0, 1.0)
    assert got == pytest.approx(0.64 + 4.0 / 9.0, abs=1e-9)


def test_transition_weight_spatial_only():
    assert transition_weight(0.64, 0.9, 2.0, 0.0) == pytest.approx(1.28, abs=1e-12)


def test_transition_weight_zero_features():
    assert transition_weight(0.0, 0.0, 3.0, 4.0) == 0.0


# -- lattice construction -----------------------------------------------------


def test_single_point_lattice():
    net = line_network(3)
    traj = Trajectory("v", "t", [[150.0, 5.0]], [0])
    lat = build_lattice(net, traj, k=4)
    assert len(lat) == 1
    assert lat.counts[0] == 3
    assert lat.d1.shape[0] == 0 and lat.link_paths == []


def test_same_segment_transition_spatial_is_one():
    net = line_network(1, length=200.0)
    traj = Trajectory("v", "t", [[50.0, 0.0], [150.0, 0.0]], [0, 30])
    lat = build_lattice(net, traj, k=1)
    assert lat.d1[0, 0, 0] == pytest.approx(1.0, abs=1e-9)


def test_lattice_entries_match_standalone_features():
    net = grid_network(4, 3, spacing=100.0)
    pts = np.array([[40.0, 8.0], [130.0, -6.0], [235.0, 12.0]])
    ts = np.array([100, 160, 220])
    lat = build_lattice(net, Trajectory("v", "t", pts, ts), k=4, scale_m=20.0)
    assert len(lat) == 3
    for t in range(3):
        cands = net.nearest_segments(pts[t], k=4)
        assert [c.segment_id for c in cands] == lat.seg_ids[t, : lat.counts[t]].tolist()
        for i, c in enumerate(cands):
            assert lat.phi[t, i] == pytest.approx(generative_feature(c.distance, 20.0), abs=1e-12)
    for t in range(2):
        slot = slot_of(ts[t])
        d_euclid = float(np.hypot(*(pts[t + 1] - pts[t])))
        dt_obs = float(ts[t + 1] - ts[t])
        cands_a = net.nearest_segments(pts[t], k=4)
        cands_b = net.nearest_segments(pts[t + 1], k=4)
        for i, a in enumerate(cands_a):
            for j, b in enumerate(cands_b):
                r = net.path_distance(a, b, slot)
                if r is None:
                    assert not lat.reachable[t, i, j]
                    assert lat.d1[t, i, j] == 0.0 and lat.d2[t, i, j] == 0.0
                else:
                    assert lat.reachable[t, i, j]
                    assert lat.d1[t, i, j] == pytest.approx(spatial_feature(d_euclid, r), abs=1e-12)
                    assert lat.d2[t, i, j] == pytest.approx(
                        temporal_feature(dt_obs, r.travel_time), abs=1e-12
                    )
                    assert lat.link_paths[t][(i, j)] == r.segments


def test_lattice_feature_ranges():
    rng = np.random.default_rng(22)
    net = grid_network(5, 5, spacing=100.0, rng=rng, jitter=8.0, speed_spread=3.0)
    pts = rng.uniform(50, 350, (6, 2))
    lat = build_lattice(net, Trajectory("v", "t", pts, np.arange(6) * 45), k=6)
    for t in range(len(lat)):
        c = lat.counts[t]
        assert (lat.phi[t, :c] > 0).all() and (lat.phi[t, :c] <= 1).all()
        assert (lat.phi[t, c:] == 0).all()
    assert (lat.d1 >= 0).all() and (lat.d1 <= 1).all()
    assert (lat.d2 >= 0).all() and (lat.d2 <= 1).all()
    assert (~lat.reachable | (lat.d1 >= 0)).all()


def test_transition_slot_uses_earlier_observation():
    # evening-slot speed differs; the transition straddling the slot boundary
    # must use the earlier point's slot
    from crfmatch.road_network import Node, RoadNetwork, RoadSegment

    nodes = [Node(0, 0, 0), Node(1, 1000, 0)]
    seg = RoadSegment(0, 0, 1, np.array([[0.0, 0.0], [1000.0, 0.0]]), np.array([5.0, 8.0, 10.0]))
    net = RoadNetwork(nodes, [seg])
    t_evening = 18 * 3600  # inside the evening window
    traj = Trajectory("v", "t", [[100.0, 0.0], [500.0, 0.0]], [t_evening, t_evening + 50])
    lat = build_lattice(net, traj, k=1)
    assert slot_of(t_evening) == TimeSlot.EVENING_PEAK
    assert lat.d2[0, 0, 0] == pytest.approx(temporal_feature(50.0, 400.0 / 8.0), abs=1e-12)


def test_off_map_point_names_index():
    net = line_network(2)
    traj = Trajectory("v", "t", [[50.0, 0.0], [50.0, 2000.0]], [0, 30])
    with pytest.raises(ValueError, match=r"point 1 is \d+ m from the nearest segment"):
        build_lattice(net, traj, k=3)


def test_empty_trajectory_rejected():
    net = line_network(2)
    traj = Trajectory("v", "t", np.empty((0, 2)), np.empty(0, dtype=np.int64))
    with pytest.raises(ValueError, match="empty"):
        build_lattice(net, traj)
