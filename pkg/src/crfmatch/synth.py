"""Synthetic worlds with ground truth, standing in for real probe data.

The grid world gives every driver a few habitual origin-destination pairs
tied to time slots; route choice over the k shortest routes is biased toward
familiar segments by exp(beta * familiarity), so beta controls how strongly
drivers repeat themselves.  Vehicles move at the segment speed of the trip's
slot and report noisy positions at a fixed native interval.
"""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .road_network import Node, RoadNetwork, RoadSegment
from .slots import EVENING_WINDOW, MORNING_WINDOW, TimeSlot
from .trajectory_io import LabeledTrajectory, Trajectory

NORMAL_WINDOW = (10 * 3600, 16 * 3600)  # daytime span well inside the normal slot


@dataclass
class WorldConfig:
    grid_w: int = 10
    grid_h: int = 10
    segment_len_m: float = 200.0
    n_drivers: int = 5
    ods_per_driver: int = 2
    history_months: int = 2
    trips_per_month: int = 10
    eval_trips_per_driver: int = 10
    beta: float = 5.0
    k_routes: int = 4
    gps_sigma_m: float = 20.0
    native_interval_s: int = 30
    speed_lo: float = 6.0  # normal-slot speed range, m/s
    speed_hi: float = 14.0
    congestion_lo: float = 0.4  # peak-slot speed factor range
    congestion_hi: float = 1.0
    seed: int = 0


@dataclass
class SimTrip:
    month: int
    labeled: LabeledTrajectory


@dataclass
class SyntheticWorld:
    net: RoadNetwork
    history: list = field(default_factory=list)  # SimTrip, month-tagged
    trips: list = field(default_factory=list)  # evaluation LabeledTrajectory


def _grid_network(cfg: WorldConfig, rng) -> RoadNetwork:
    W, H, L = cfg.grid_w, cfg.grid_h, cfg.segment_len_m
    nodes = [Node(j * W + i, i * L, j * L) for j in range(H) for i in range(W)]
    roads = []
    for j in range(H):
        for i in range(W):
            if i + 1 < W:
                roads.append((j * W + i, j * W + i + 1))
            if j + 1 < H:
                roads.append((j * W + i, (j + 1) * W + i))
    segments = []
    for r, (u, v) in enumerate(roads):
        base = rng.uniform(cfg.speed_lo, cfg.speed_hi)
        morning = base * rng.uniform(cfg.congestion_lo, cfg.congestion_hi)
        evening = base * rng.uniform(cfg.congestion_lo, cfg.congestion_hi)
        speeds = np.array([morning, evening, base])
        pu = [nodes[u].x, nodes[u].y]
        pv = [nodes[v].x, nodes[v].y]
        segments.append(RoadSegment(2 * r, u, v, np.array([pu, pv]), speeds.copy()))
        segments.append(RoadSegment(2 * r + 1, v, u, np.array([pv, pu]), speeds.copy()))
    return RoadNetwork(nodes, segments)


def _route_graph(net: RoadNetwork) -> nx.DiGraph:
    G = nx.DiGraph()
    for s in net.segments:
        G.add_edge(s.from_node, s.to_node, weight=s.length, seg=s.id)
    return G


def _k_shortest_routes(net, G, o_seg: int, d_seg: int, k: int) -> list:
    """Up to k shortest complete routes from origin segment to destination
    segment, each a list of segment ids including both endpoints."""
    src = net.segment(o_seg).to_node
    dst = net.segment(d_seg).from_node
    if src == dst:
        return [[o_seg, d_seg]]
    try:
        node_paths = itertools.islice(nx.shortest_simple_paths(G, src, dst, weight="weight"), k)
        routes = []
        for p in node_paths:
            mids = [G[u][v]["seg"] for u, v in zip(p, p[1:])]
            routes.append([o_seg] + mids + [d_seg])
        return routes
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        raise ValueError(f"no route from segment {o_seg} to segment {d_seg}") from None


def _slot_for_od(index: int) -> TimeSlot:
    if index == 0:
        return TimeSlot.MORNING_PEAK
    if index == 1:
        return TimeSlot.EVENING_PEAK
    return TimeSlot.NORMAL


_WINDOWS = {
    TimeSlot.MORNING_PEAK: MORNING_WINDOW,
    TimeSlot.EVENING_PEAK: EVENING_WINDOW,
    TimeSlot.NORMAL: NORMAL_WINDOW,
}


def _interp_polyline(poly: np.ndarray, cum: np.ndarray, off: float) -> np.ndarray:
    j = int(np.searchsorted(cum, off, side="right")) - 1
    j = min(max(j, 0), len(poly) - 2)
    span = cum[j + 1] - cum[j]
    t = 0.0 if span == 0.0 else (off - cum[j]) / span
    return poly[j] + t * (poly[j + 1] - poly[j])


def simulate_trip(
    net: RoadNetwork,
    vehicle_id: str,
    trip_id: str,
    route: list,
    t0: int,
    slot: TimeSlot,
    interval_s: int,
    sigma_m: float,
    rng,
) -> LabeledTrajectory:
    """Drive the route at slot speeds, emitting floor(duration/interval)+1
    noisy points with their true segment labels."""
    lens = np.array([net.segment(s).length for s in route])
    speeds = np.array([net.segment(s).speeds[int(slot)] for s in route])
    ct = np.concatenate([[0.0], np.cumsum(lens / speeds)])
    duration = ct[-1]
    n = int(duration // interval_s) + 1
    cums = {}
    xy = np.empty((n, 2))
    labels = np.empty(n, dtype=np.int64)
    for i in range(n):
        s = i * interval_s
        k = int(np.searchsorted(ct, s, side="right")) - 1
        k = min(k, len(route) - 1)
        off = min((s - ct[k]) * speeds[k], lens[k])
        seg = net.segment(route[k])
        if route[k] not in cums:
            d = np.hypot(np.diff(seg.polyline[:, 0]), np.diff(seg.polyline[:, 1]))
            cums[route[k]] = np.concatenate([[0.0], np.cumsum(d)])
        xy[i] = _interp_polyline(seg.polyline, cums[route[k]], off)
        labels[i] = route[k]
    if sigma_m > 0.0:
        xy = xy + rng.normal(0.0, sigma_m, size=xy.shape)
    t = t0 + np.arange(n, dtype=np.int64) * interval_s
    traj = Trajectory(vehicle_id, trip_id, xy, t)
    return LabeledTrajectory(traj, labels, list(route))


class _Driver:
    def __init__(self, vehicle_id, ods):
        self.vehicle_id = vehicle_id
        self.ods = ods  # list of (o_seg, d_seg, slot)
        self.seg_counts = Counter()
        self.trip_no = 0


def _sample_od(cfg: WorldConfig, net, G, rng):
    W, H = cfg.grid_w, cfg.grid_h
    min_l1 = max(2, round(0.4 * (W + H)))
    for _ in range(1000):
        ox, oy = rng.integers(W), rng.integers(H)
        dx, dy = rng.integers(W), rng.integers(H)
        if abs(ox - dx) + abs(oy - dy) < min_l1:
            continue
        o_node = oy * W + ox
        d_node = dy * W + dx
        o_out = [s.id for s in net.segments if s.from_node == o_node]
        d_in = [s.id for s in net.segments if s.to_node == d_node]
        o_seg = int(o_out[rng.integers(len(o_out))])
        d_seg = int(d_in[rng.integers(len(d_in))])
        if o_seg != d_seg:
            return o_seg, d_seg
    raise ValueError("could not sample a feasible OD pair; grid too small")


def _choose_route(driver: _Driver, routes: list, beta: float, rng) -> list:
    fams = np.array(
        [sum(1 for s in r if driver.seg_counts[s] > 0) / len(r) for r in routes]
    )
    w = np.exp(beta * fams)
    p = w / w.sum()
    route = routes[int(rng.choice(len(routes), p=p))]
    driver.seg_counts.update(route)
    return route


def _do_trip(cfg, net, driver: _Driver, routes, slot, month: int, day: int, rng) -> LabeledTrajectory:
    route = _choose_route(driver, routes, cfg.beta, rng)
    win = _WINDOWS[slot]
    t0 = (month * 30 + day) * 86400 + int(rng.integers(win[0], win[1]))
    trip_id = f"t{driver.trip_no:06d}"
    driver.trip_no += 1
    return simulate_trip(
        net, driver.vehicle_id, trip_id, route, t0, slot,
        cfg.native_interval_s, cfg.gps_sigma_m, rng,
    )


def generate_synthetic(cfg: WorldConfig) -> SyntheticWorld:
    """Grid world with month-tagged driver history and an evaluation trip set.

    Deterministic for a given config and seed.
    """
    rng = np.random.default_rng(cfg.seed)
    net = _grid_network(cfg, rng)
    G = _route_graph(net)
    route_cache = {}

    drivers = []
    for d in range(cfg.n_drivers):
        ods = []
        for oi in range(cfg.ods_per_driver):
            o_seg, d_seg = _sample_od(cfg, net, G, rng)
            ods.append((o_seg, d_seg, _slot_for_od(oi)))
        drivers.append(_Driver(f"v{d:03d}", ods))

    def routes_for(od):
        key = (od[0], od[1])
        if key not in route_cache:
            route_cache[key] = _k_shortest_routes(net, G, od[0], od[1], cfg.k_routes)
        return route_cache[key]

    world = SyntheticWorld(net)
    for month in range(cfg.history_months):
        for driver in drivers:
            for i in range(cfg.trips_per_month):
                od = driver.ods[int(rng.integers(len(driver.ods)))]
                lt = _do_trip(cfg, net, driver, routes_for(od), od[2], month, i % 30, rng)
                world.history.append(SimTrip(month, lt))
    for driver in drivers:
        for i in range(cfg.eval_trips_per_driver):
            od = driver.ods[int(rng.integers(len(driver.ods)))]
            lt = _do_trip(cfg, net, driver, routes_for(od), od[2], cfg.history_months, i % 30, rng)
            world.trips.append(lt)
    return world


@dataclass
class CorridorConfig:
    """Chain of junction pairs connected by two equal-length arcs that differ
    only in speed, for isolating the temporal feature."""

    n_links: int = 8
    spacing_m: float = 1200.0
    bulge_m: float = 40.0
    fast_speed: float = 14.0
    slow_speed: float = 6.0
    n_trips: int = 60
    gps_sigma_m: float = 30.0
    native_interval_s: int = 15
    seed: int = 0


def generate_corridor(cfg: CorridorConfig) -> SyntheticWorld:
    """Corridor world: per link the vehicle takes the fast or slow arc with
    equal probability; arcs mirror each other so their lengths tie exactly."""
    rng = np.random.default_rng(cfg.seed)
    nodes = [Node(i, i * cfg.spacing_m, 0.0) for i in range(cfg.n_links + 1)]
    segments = []
    for i in range(cfg.n_links):
        x0, x1 = i * cfg.spacing_m, (i + 1) * cfg.spacing_m
        mid = (x0 + x1) / 2.0
        fast = [[x0, 0.0], [mid, -cfg.bulge_m], [x1, 0.0]]
        slow = [[x0, 0.0], [mid, cfg.bulge_m], [x1, 0.0]]
        segments.append(RoadSegment(2 * i, i, i + 1, np.array(fast), np.full(3, cfg.fast_speed)))
        segments.append(RoadSegment(2 * i + 1, i, i + 1, np.array(slow), np.full(3, cfg.slow_speed)))
    net = RoadNetwork(nodes, segments)

    world = SyntheticWorld(net)
    for n in range(cfg.n_trips):
        route = [2 * i + int(rng.integers(2)) for i in range(cfg.n_links)]
        t0 = n * 86400 + NORMAL_WINDOW[0] + int(rng.integers(0, 3600))
        lt = simulate_trip(
            net, "v000", f"t{n:06d}", route, t0, TimeSlot.NORMAL,
            cfg.native_interval_s, cfg.gps_sigma_m, rng,
        )
        world.trips.append(lt)
    return world
