"""Shared builders and brute-force oracles used across the test suite.

The oracles deliberately avoid the library's own shortcuts: scores are summed
term by term over explicitly enumerated assignments, nearest segments come
from a full scan, and routes come from exhaustive simple-path search, so any
agreement with the fast implementations is meaningful.
"""

import itertools
import math

import numpy as np

from crfmatch.features import CandidateLattice
from crfmatch.road_network import Node, RoadNetwork, RoadSegment

# -- network builders --------------------------------------------------------


def grid_network(
    w,
    h,
    spacing=100.0,
    speed=10.0,
    rng=None,
    jitter=0.0,
    speed_spread=0.0,
    cell_size=250.0,
):
    """w x h node grid with two directed segments per road (ids 2r, 2r+1).

    jitter perturbs node positions (breaks length ties); speed_spread draws
    per-road speeds from [speed - spread, speed + spread].
    """
    nodes = []
    for j in range(h):
        for i in range(w):
            x, y = i * spacing, j * spacing
            if rng is not None and jitter > 0.0:
                x += float(rng.uniform(-jitter, jitter))
                y += float(rng.uniform(-jitter, jitter))
            nodes.append(Node(j * w + i, x, y))
    roads = []
    for j in range(h):
        for i in range(w):
            n = j * w + i
            if i + 1 < w:
                roads.append((n, n + 1))
            if j + 1 < h:
                roads.append((n, n + w))
    segments = []
    for r, (u, v) in enumerate(roads):
        s = speed
        if rng is not None and speed_spread > 0.0:
            s = speed + float(rng.uniform(-speed_spread, speed_spread))
        speeds = np.full(3, s)
        pu = [nodes[u].x, nodes[u].y]
        pv = [nodes[v].x, nodes[v].y]
        segments.append(RoadSegment(2 * r, u, v, np.array([pu, pv]), speeds.copy()))
        segments.append(RoadSegment(2 * r + 1, v, u, np.array([pv, pu]), speeds.copy()))
    return RoadNetwork(nodes, segments, cell_size=cell_size)


def line_network(n_segments=3, length=100.0, speed=10.0, cell_size=250.0):
    """One-way chain of collinear segments along the x axis, ids 0..n-1."""
    nodes = [Node(i, i * length, 0.0) for i in range(n_segments + 1)]
    segments = [
        RoadSegment(
            i, i, i + 1,
            np.array([[i * length, 0.0], [(i + 1) * length, 0.0]]),
            np.full(3, speed),
        )
        for i in range(n_segments)
    ]
    return RoadNetwork(nodes, segments, cell_size=cell_size)


# -- lattice builders --------------------------------------------------------


def make_lattice(phi, d1, d2, counts=None, t=None, seg_ids=None, reachable=None):
    """CandidateLattice from explicit feature tensors (k = phi.shape[1])."""
    phi = np.asarray(phi, dtype=np.float64)
    d1 = np.asarray(d1, dtype=np.float64)
    d2 = np.asarray(d2, dtype=np.float64)
    T, k = phi.shape
    if counts is None:
        counts = np.full(T, k, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    if t is None:
        t = np.arange(T, dtype=np.int64) * 30
    if seg_ids is None:
        seg_ids = np.full((T, k), -1, dtype=np.int64)
        for i in range(T):
            seg_ids[i, : counts[i]] = 100 * i + np.arange(counts[i])
    if reachable is None:
        reachable = np.ones((max(T - 1, 0), k, k), dtype=bool)
    return CandidateLattice(
        "v000", "t000", np.asarray(t, dtype=np.int64), counts, seg_ids,
        phi, d1, d2, reachable, [{} for _ in range(T - 1)], [None] * T,
    )


def random_lattice(rng, max_layers=4, max_candidates=4, full=False):
    """Random ragged lattice with features in [0, 1]."""
    T = int(rng.integers(1, max_layers + 1))
    k = max_candidates
    if full:
        counts = np.full(T, k, dtype=np.int64)
    else:
        counts = rng.integers(1, k + 1, size=T).astype(np.int64)
    phi = np.zeros((T, k))
    for t in range(T):
        phi[t, : counts[t]] = rng.uniform(0.0, 1.0, counts[t])
    d1 = np.zeros((max(T - 1, 0), k, k))
    d2 = np.zeros((max(T - 1, 0), k, k))
    for t in range(T - 1):
        d1[t, : counts[t], : counts[t + 1]] = rng.uniform(0.0, 1.0, (counts[t], counts[t + 1]))
        d2[t, : counts[t], : counts[t + 1]] = rng.uniform(0.0, 1.0, (counts[t], counts[t + 1]))
    return make_lattice(phi, d1, d2, counts=counts)


# -- CRF oracles (exhaustive enumeration) ------------------------------------


def enumerate_assignments(counts):
    return itertools.product(*[range(int(c)) for c in counts])


def brute_score(lat, assignment, mu, l1, l2):
    s = 0.0
    for t, i in enumerate(assignment):
        s += mu * lat.phi[t, i]
    for t in range(len(assignment) - 1):
        s += l1 * lat.d1[t, assignment[t], assignment[t + 1]]
        s += l2 * lat.d2[t, assignment[t], assignment[t + 1]]
    return s


def _wins_tie(a, b):
    """True when a beats b under: smaller index at the latest differing layer."""
    for x, y in zip(reversed(a), reversed(b)):
        if x != y:
            return x < y
    return False


def brute_argmax(lat, mu, l1, l2):
    """(assignment, score) maximizing the score, ties resolved like the decoder."""
    best_a, best_s = None, -math.inf
    for a in enumerate_assignments(lat.counts):
        s = brute_score(lat, a, mu, l1, l2)
        if s > best_s or (s == best_s and _wins_tie(a, best_a)):
            best_a, best_s = a, s
    return np.array(best_a, dtype=np.int64), best_s


def brute_log_partition(lat, mu, l1, l2):
    scores = [brute_score(lat, a, mu, l1, l2) for a in enumerate_assignments(lat.counts)]
    m = max(scores)
    return m + math.log(sum(math.exp(s - m) for s in scores))


def brute_expectations(lat, mu, l1, l2):
    """(E[sum phi], E[sum d1], E[sum d2]) under the normalized distribution."""
    logz = brute_log_partition(lat, mu, l1, l2)
    e = [0.0, 0.0, 0.0]
    for a in enumerate_assignments(lat.counts):
        p = math.exp(brute_score(lat, a, mu, l1, l2) - logz)
        f_phi = sum(lat.phi[t, i] for t, i in enumerate(a))
        f_d1 = sum(lat.d1[t, a[t], a[t + 1]] for t in range(len(a) - 1))
        f_d2 = sum(lat.d2[t, a[t], a[t + 1]] for t in range(len(a) - 1))
        e[0] += p * f_phi
        e[1] += p * f_d1
        e[2] += p * f_d2
    return tuple(e)


# -- road network oracles ----------------------------------------------------


def brute_nearest(net, point, k):
    """Full scan over every segment, sorted by (distance, segment id)."""
    found = [net.project_point(point, s.id) for s in net.segments]
    found.sort(key=lambda p: (p.distance, p.segment_id))
    return found[:k]


def brute_route(net, a, b, slot):
    """Exhaustive simple-path route search; (distance, time, segments) or None.

    Enumerates every simple node path between the projections' anchor nodes,
    which covers all optimal routes because edge lengths are positive.
    """
    ia = net.segment(a.segment_id)
    ib = net.segment(b.segment_id)
    sl = int(slot)
    out_by_node = {}
    for s in net.segments:
        out_by_node.setdefault(s.from_node, []).append(s)

    best = None

    def consider(dist, time, segs):
        nonlocal best
        if best is None or dist < best[0]:
            best = (dist, time, segs)

    if a.segment_id == b.segment_id and b.offset >= a.offset:
        d = b.offset - a.offset
        consider(d, d / ia.speeds[sl], [a.segment_id])

    tail = ia.length - a.offset
    target = ib.from_node

    def dfs(u, visited, segs, dist):
        if u == target:
            time = tail / ia.speeds[sl] + b.offset / ib.speeds[sl]
            time += sum(net.segment(x).length / net.segment(x).speeds[sl] for x in segs)
            consider(tail + dist + b.offset, time, [a.segment_id] + segs + [b.segment_id])
            return
        for s in out_by_node.get(u, []):
            if s.to_node not in visited:
                dfs(s.to_node, visited | {s.to_node}, segs + [s.id], dist + s.length)

    dfs(ia.to_node, {ia.to_node}, [], 0.0)
    return best


def polyline_point_at(poly, offset):
    """Interpolated point at an arc-length offset along a polyline."""
    poly = np.asarray(poly, dtype=np.float64)
    d = np.hypot(np.diff(poly[:, 0]), np.diff(poly[:, 1]))
    cum = np.concatenate([[0.0], np.cumsum(d)])
    j = int(np.searchsorted(cum, offset, side="right")) - 1
    j = min(max(j, 0), len(poly) - 2)
    span = cum[j + 1] - cum[j]
    t = 0.0 if span == 0.0 else (offset - cum[j]) / span
    return poly[j] + t * (poly[j + 1] - poly[j])
