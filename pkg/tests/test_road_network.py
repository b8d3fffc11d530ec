"""Geometry, candidate search, and routing against brute-force oracles."""

import json
import math

import numpy as np
import pytest

from conftest import brute_nearest, brute_route, grid_network, line_network, polyline_point_at
from crfmatch.road_network import (
    EARTH_RADIUS_M,
    Node,
    Projection,
    RoadNetwork,
    RoadSegment,
    load_network,
    planar_from_latlon,
    save_network,
)
from crfmatch.slots import TimeSlot


def random_polyline(rng, n_vertices):
    start = rng.uniform(-200, 200, 2)
    steps = rng.uniform(-120, 120, (n_vertices - 1, 2))
    pts = np.vstack([start, start + np.cumsum(steps, axis=0)])
    return pts


def single_segment_net(poly, speed=10.0):
    poly = np.asarray(poly, dtype=np.float64)
    nodes = [Node(0, *poly[0]), Node(1, *poly[-1])]
    return RoadNetwork(nodes, [RoadSegment(0, 0, 1, poly, np.full(3, speed))])


# -- projection ---------------------------------------------------------------


def test_projection_matches_dense_sampling():
    # the true minimum can only be at or below a sampled minimum, and the
    # sampled minimum is within one sample spacing of the truth
    rng = np.random.default_rng(7)
    for _ in range(40):
        poly = random_polyline(rng, int(rng.integers(2, 5)))
        net = single_segment_net(poly)
        length = net.segment(0).length
        n = 20001
        offsets = np.linspace(0.0, length, n)
        samples = np.array([polyline_point_at(poly, o) for o in offsets])
        for _ in range(5):
            p = rng.uniform(-300, 300, 2)
            proj = net.project_point(p, 0)
            sampled_min = float(np.min(np.hypot(*(samples - p).T)))
            spacing = length / (n - 1)
            assert proj.distance <= sampled_min + 1e-9
            assert sampled_min - proj.distance <= spacing
            # reported point sits at the reported offset and distance
            at_off = polyline_point_at(poly, proj.offset)
            assert np.hypot(*(at_off - np.asarray(proj.point))) < 1e-6
            assert abs(np.hypot(*(np.asarray(proj.point) - p)) - proj.distance) < 1e-9
            assert 0.0 <= proj.offset <= length + 1e-9


def test_projection_endpoint_clamp():
    net = line_network(1, length=100.0)
    past_end = net.project_point((250.0, 30.0), 0)
    assert past_end.offset == pytest.approx(100.0)
    assert past_end.point == pytest.approx((100.0, 0.0))
    assert past_end.distance == pytest.approx(math.hypot(150.0, 30.0))
    before_start = net.project_point((-40.0, 0.0), 0)
    assert before_start.offset == 0.0
    assert before_start.distance == pytest.approx(40.0)


def test_projection_tie_takes_smaller_offset():
    # U-shaped road: the query is equidistant from both arms
    poly = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]]
    net = single_segment_net(poly)
    proj = net.project_point((5.0, 5.0), 0)
    assert proj.distance == pytest.approx(5.0)
    assert proj.offset == pytest.approx(5.0)  # first arm, not the far one at 25


# -- nearest segments ---------------------------------------------------------


def test_nearest_matches_full_scan():
    rng = np.random.default_rng(11)
    net = grid_network(5, 4, spacing=120.0, rng=rng, jitter=15.0, cell_size=100.0)
    for _ in range(100):
        p = rng.uniform(-150, 650, 2)
        got = net.nearest_segments(p, k=6)
        want = brute_nearest(net, p, 6)
        assert [g.segment_id for g in got] == [w.segment_id for w in want]
        assert np.allclose([g.distance for g in got], [w.distance for w in want], atol=1e-9)


def test_nearest_far_outside_bbox():
    net = grid_network(3, 3, spacing=100.0, cell_size=50.0)
    p = (5000.0, -4000.0)
    got = net.nearest_segments(p, k=4)
    want = brute_nearest(net, p, 4)
    assert [g.segment_id for g in got] == [w.segment_id for w in want]


def test_nearest_ties_break_to_smaller_id():
    # both directions of one road have identical geometry, hence equal distance
    net = grid_network(3, 2, spacing=100.0)
    got = net.nearest_segments((50.0, 2.0), k=2)
    assert got[0].distance == got[1].distance
    assert got[0].segment_id + 1 == got[1].segment_id
    assert got[0].segment_id % 2 == 0


def test_nearest_k_larger_than_network():
    net = line_network(2)
    got = net.nearest_segments((50.0, 10.0), k=6)
    assert len(got) == 2


# -- routing ------------------------------------------------------------------


def route_fixture_pairs(net, rng, n_pairs):
    segs = net.segments
    pairs = []
    for _ in range(n_pairs):
        sa = segs[int(rng.integers(len(segs)))]
        sb = segs[int(rng.integers(len(segs)))]
        oa = float(rng.uniform(0, sa.length))
        ob = float(rng.uniform(0, sb.length))
        pairs.append(
            (
                Projection(sa.id, tuple(polyline_point_at(sa.polyline, oa)), oa, 0.0),
                Projection(sb.id, tuple(polyline_point_at(sb.polyline, ob)), ob, 0.0),
            )
        )
    return pairs


def test_path_distance_matches_exhaustive_search():
    rng = np.random.default_rng(3)
    # jittered geometry: unique optimum almost surely, so sequences must agree
    net = grid_network(3, 3, spacing=100.0, rng=rng, jitter=12.0, speed_spread=3.0)
    for a, b in route_fixture_pairs(net, rng, 60):
        got = net.path_distance(a, b, TimeSlot.NORMAL)
        want = brute_route(net, a, b, TimeSlot.NORMAL)
        assert got is not None and want is not None
        assert got.distance == pytest.approx(want[0], abs=1e-9)
        assert got.travel_time == pytest.approx(want[1], abs=1e-9)
        assert got.segments == want[2]


def test_path_distance_regular_grid_distances():
    # equal-length ties exist here; only the optimal value is pinned down
    rng = np.random.default_rng(4)
    net = grid_network(3, 3, spacing=100.0)
    for a, b in route_fixture_pairs(net, rng, 40):
        got = net.path_distance(a, b, TimeSlot.NORMAL)
        want = brute_route(net, a, b, TimeSlot.NORMAL)
        assert got.distance == pytest.approx(want[0], abs=1e-9)
        # returned chain is internally consistent even when ties were broken
        # differently: consecutive segments connect and lengths add up
        segs = [net.segment(s) for s in got.segments]
        for s, nxt in zip(segs, segs[1:]):
            assert s.to_node == nxt.from_node
        if len(segs) > 1:
            total = (segs[0].length - a.offset) + sum(s.length for s in segs[1:-1]) + b.offset
            assert total == pytest.approx(got.distance, abs=1e-9)


def test_path_distance_same_segment():
    net = line_network(3, length=100.0, speed=20.0)
    a = Projection(1, (110.0, 0.0), 10.0, 0.0)
    b = Projection(1, (180.0, 0.0), 80.0, 0.0)
    route = net.path_distance(a, b, TimeSlot.NORMAL)
    assert route.distance == pytest.approx(70.0)
    assert route.travel_time == pytest.approx(70.0 / 20.0)
    assert route.segments == [1]


def test_path_distance_backward_on_one_way_chain_is_unreachable():
    net = line_network(3)
    a = Projection(1, (180.0, 0.0), 80.0, 0.0)
    b = Projection(1, (110.0, 0.0), 10.0, 0.0)
    assert net.path_distance(a, b, TimeSlot.NORMAL) is None


def test_path_distance_backward_uses_loop_when_one_exists():
    net = grid_network(2, 2, spacing=100.0)
    seg = net.segments[0]
    a = Projection(seg.id, (80.0, 0.0), 80.0, 0.0)
    b = Projection(seg.id, (20.0, 0.0), 20.0, 0.0)
    route = net.path_distance(a, b, TimeSlot.NORMAL)
    want = brute_route(net, a, b, TimeSlot.NORMAL)
    assert route is not None
    assert route.distance == pytest.approx(want[0], abs=1e-9)
    assert route.distance > seg.length  # had to go around, not backward


def test_path_distance_unreachable_components():
    nodes = [Node(0, 0, 0), Node(1, 100, 0), Node(2, 0, 500), Node(3, 100, 500)]
    segments = [
        RoadSegment(0, 0, 1, np.array([[0.0, 0.0], [100.0, 0.0]]), np.full(3, 10.0)),
        RoadSegment(1, 2, 3, np.array([[0.0, 500.0], [100.0, 500.0]]), np.full(3, 10.0)),
    ]
    net = RoadNetwork(nodes, segments)
    a = Projection(0, (50.0, 0.0), 50.0, 0.0)
    b = Projection(1, (50.0, 500.0), 50.0, 0.0)
    assert net.path_distance(a, b, TimeSlot.NORMAL) is None


def test_path_distance_at_least_euclidean():
    rng = np.random.default_rng(9)
    net = grid_network(4, 4, spacing=100.0, rng=rng, jitter=10.0)
    for a, b in route_fixture_pairs(net, rng, 50):
        route = net.path_distance(a, b, TimeSlot.NORMAL)
        if route is None:
            continue
        euclid = math.hypot(a.point[0] - b.point[0], a.point[1] - b.point[1])
        assert route.distance >= euclid - 1e-6


def test_path_distance_slot_changes_time_not_distance():
    nodes = [Node(0, 0, 0), Node(1, 100, 0)]
    seg = RoadSegment(0, 0, 1, np.array([[0.0, 0.0], [100.0, 0.0]]), np.array([5.0, 8.0, 10.0]))
    net = RoadNetwork(nodes, [seg])
    a = Projection(0, (0.0, 0.0), 0.0, 0.0)
    b = Projection(0, (100.0, 0.0), 100.0, 0.0)
    morning = net.path_distance(a, b, TimeSlot.MORNING_PEAK)
    normal = net.path_distance(a, b, TimeSlot.NORMAL)
    assert morning.distance == normal.distance == pytest.approx(100.0)
    assert morning.travel_time == pytest.approx(20.0)
    assert normal.travel_time == pytest.approx(10.0)


# -- adjacency ----------------------------------------------------------------


def test_adjacent_segments_matches_scan():
    rng = np.random.default_rng(5)
    net = grid_network(4, 3, spacing=100.0, rng=rng, jitter=5.0)
    for s in net.segments:
        want = sorted(x.id for x in net.segments if x.from_node == s.to_node)
        assert sorted(net.adjacent_segments(s.id)) == want


# -- validation and serialization ---------------------------------------------


def test_duplicate_node_id_rejected():
    nodes = [Node(0, 0, 0), Node(0, 1, 1)]
    with pytest.raises(ValueError, match="duplicate node id 0"):
        RoadNetwork(nodes, [])


def test_duplicate_segment_id_rejected():
    nodes = [Node(0, 0, 0), Node(1, 100, 0)]
    seg = lambda: RoadSegment(7, 0, 1, np.array([[0.0, 0.0], [100.0, 0.0]]), np.full(3, 10.0))
    with pytest.raises(ValueError, match="duplicate segment id 7"):
        RoadNetwork(nodes, [seg(), seg()])


def test_unknown_endpoint_rejected():
    nodes = [Node(0, 0, 0), Node(1, 100, 0)]
    bad = RoadSegment(3, 0, 9, np.array([[0.0, 0.0], [100.0, 0.0]]), np.full(3, 10.0))
    with pytest.raises(ValueError, match="segment 3: unknown to node 9"):
        RoadNetwork(nodes, [bad])


def test_zero_length_polyline_rejected():
    nodes = [Node(0, 0, 0), Node(1, 100, 0)]
    bad = RoadSegment(2, 0, 1, np.array([[5.0, 5.0], [5.0, 5.0]]), np.full(3, 10.0))
    with pytest.raises(ValueError, match="segment 2: zero-length polyline"):
        RoadNetwork(nodes, [bad])


def test_nonpositive_speed_rejected():
    nodes = [Node(0, 0, 0), Node(1, 100, 0)]
    bad = RoadSegment(4, 0, 1, np.array([[0.0, 0.0], [100.0, 0.0]]), np.array([10.0, 0.0, 10.0]))
    with pytest.raises(ValueError, match="segment 4: speeds must be positive"):
        RoadNetwork(nodes, [bad])


def test_short_polyline_rejected():
    with pytest.raises(ValueError, match="segment 1: polyline needs at least 2 points"):
        RoadSegment(1, 0, 1, np.array([[0.0, 0.0]]), np.full(3, 10.0))


def test_save_load_roundtrip_is_stable(tmp_path):
    rng = np.random.default_rng(13)
    net = grid_network(3, 3, spacing=150.0, rng=rng, jitter=20.0, speed_spread=2.0)
    p1 = tmp_path / "net1.json"
    p2 = tmp_path / "net2.json"
    save_network(p1, net)
    loaded = load_network(p1)
    assert loaded.to_dict() == net.to_dict()
    save_network(p2, loaded)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_latlon_projects_to_meters(tmp_path):
    # two nodes one milliarc-degree apart near the equator
    doc = {
        "nodes": [
            {"id": 0, "lat": 0.0, "lon": 0.0},
            {"id": 1, "lat": 0.0, "lon": 0.001},
        ],
        "segments": [
            {
                "id": 0,
                "from": 0,
                "to": 1,
                "polyline": [[0.0, 0.0], [0.0, 0.001]],
                "speed": {"morning": 10.0, "evening": 10.0, "normal": 10.0},
            }
        ],
    }
    p = tmp_path / "geo.json"
    p.write_text(json.dumps(doc))
    net = load_network(p)
    want = math.radians(0.001) * EARTH_RADIUS_M  # ~111 m
    assert net.segment(0).length == pytest.approx(want, rel=1e-9)


def test_planar_from_latlon_known_offsets():
    xy, origin = planar_from_latlon([[10.0, 20.0], [10.0, 20.001], [10.001, 20.0]])
    assert origin == pytest.approx((10.0 + 1e-3 / 3, 20.0 + 1e-3 / 3))
    east = math.radians(0.001) * math.cos(math.radians(origin[0])) * EARTH_RADIUS_M
    north = math.radians(0.001) * EARTH_RADIUS_M
    assert xy[1, 0] - xy[0, 0] == pytest.approx(east, rel=1e-9)
    assert xy[2, 1] - xy[0, 1] == pytest.approx(north, rel=1e-9)


def test_unknown_segment_id_raises():
    net = line_network(2)
    with pytest.raises(ValueError, match="unknown segment id 99"):
        net.project_point((0.0, 0.0), 99)
