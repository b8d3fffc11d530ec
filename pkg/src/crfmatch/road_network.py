"""Directed road network: loading, candidate lookup, and route distances.

Coordinates are planar meters.  Lat/lon input is converted on ingest with an
equirectangular projection about the dataset centroid.  Undirected roads are
represented as two directed segments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

EARTH_RADIUS_M = 6371000.0
DEFAULT_CELL_SIZE_M = 250.0
DEFAULT_TOP_K = 6


@dataclass
class Node:
    id: int
    x: float
    y: float


@dataclass
class RoadSegment:
    """One directed segment. length is derived from the polyline arc length."""

    id: int
    from_node: int
    to_node: int
    polyline: np.ndarray
    speeds: np.ndarray  # m/s indexed by TimeSlot (morning, evening, normal)
    length: float = field(init=False)

    def __post_init__(self):
        self.polyline = np.asarray(self.polyline, dtype=np.float64)
        if isinstance(self.speeds, dict):
            self.speeds = np.array(
                [self.speeds["morning"], self.speeds["evening"], self.speeds["normal"]],
                dtype=np.float64,
            )
        else:
            self.speeds = np.asarray(self.speeds, dtype=np.float64)
        if self.polyline.ndim != 2 or self.polyline.shape[0] < 2 or self.polyline.shape[1] != 2:
            raise ValueError(f"segment {self.id}: polyline needs at least 2 points of (x, y)")
        diffs = np.diff(self.polyline, axis=0)
        self.length = float(np.sum(np.hypot(diffs[:, 0], diffs[:, 1])))


@dataclass
class Projection:
    """A point projected onto a segment: offset is arc length from the segment start."""

    segment_id: int
    point: tuple
    offset: float
    distance: float


@dataclass
class RoutePath:
    """Shortest route between two projections: meters, seconds, traversed segment ids."""

    distance: float
    travel_time: float
    segments: list


def planar_from_latlon(latlon, origin=None):
    """Equirectangular projection of (lat, lon) degree pairs to planar meters.

    origin defaults to the centroid of the input; returns (xy array, origin).
    """
    ll = np.asarray(latlon, dtype=np.float64)
    if origin is None:
        origin = (float(ll[:, 0].mean()), float(ll[:, 1].mean()))
    lat0, lon0 = origin
    x = np.radians(ll[:, 1] - lon0) * math.cos(math.radians(lat0)) * EARTH_RADIUS_M
    y = np.radians(ll[:, 0] - lat0) * EARTH_RADIUS_M
    return np.column_stack([x, y]), origin


class RoadNetwork:
    """Immutable road graph with a uniform grid index over segment geometry.

    All queries are safe to call concurrently once construction finishes; the
    shortest-path cache only ever adds equivalent entries.
    """

    def __init__(self, nodes, segments, cell_size=DEFAULT_CELL_SIZE_M):
        self.nodes = list(nodes)
        self.segments = list(segments)
        self.cell_size = float(cell_size)
        self._validate()
        self._build_arrays()
        self._build_grid()
        self._build_csr()
        self._dij_cache = {}

    # -- construction ------------------------------------------------------

    def _validate(self):
        self._node_idx = {}
        for n in self.nodes:
            if n.id in self._node_idx:
                raise ValueError(f"duplicate node id {n.id}")
            self._node_idx[n.id] = len(self._node_idx)
        self._seg_idx = {}
        for s in self.segments:
            if s.id in self._seg_idx:
                raise ValueError(f"duplicate segment id {s.id}")
            if s.from_node not in self._node_idx:
                raise ValueError(f"segment {s.id}: unknown from node {s.from_node}")
            if s.to_node not in self._node_idx:
                raise ValueError(f"segment {s.id}: unknown to node {s.to_node}")
            if s.length <= 0.0:
                raise ValueError(f"segment {s.id}: zero-length polyline")
            if s.speeds.shape != (3,) or np.any(s.speeds <= 0.0):
                raise ValueError(f"segment {s.id}: speeds must be positive for all slots")
            self._seg_idx[s.id] = len(self._seg_idx)

    def _build_arrays(self):
        W = len(self.segments)
        self._seg_ids = np.array([s.id for s in self.segments], dtype=np.int64)
        self._from_idx = np.array([self._node_idx[s.from_node] for s in self.segments], dtype=np.int64)
        self._to_idx = np.array([self._node_idx[s.to_node] for s in self.segments], dtype=np.int64)
        self._length = np.array([s.length for s in self.segments], dtype=np.float64)
        self._speeds = np.array([s.speeds for s in self.segments], dtype=np.float64)
        ptr = np.zeros(W + 1, dtype=np.int64)
        for i, s in enumerate(self.segments):
            ptr[i + 1] = ptr[i] + len(s.polyline)
        vx = np.empty(ptr[-1], dtype=np.float64)
        vy = np.empty(ptr[-1], dtype=np.float64)
        vcum = np.empty(ptr[-1], dtype=np.float64)
        for i, s in enumerate(self.segments):
            lo, hi = ptr[i], ptr[i + 1]
            vx[lo:hi] = s.polyline[:, 0]
            vy[lo:hi] = s.polyline[:, 1]
            d = np.hypot(np.diff(s.polyline[:, 0]), np.diff(s.polyline[:, 1]))
            vcum[lo:hi] = np.concatenate([[0.0], np.cumsum(d)])
        self._vx, self._vy, self._vcum, self._ptr = vx, vy, vcum, ptr

    def _build_grid(self):
        s = self.cell_size
        self._minx = float(self._vx.min())
        self._miny = float(self._vy.min())
        gx = int((self._vx.max() - self._minx) // s) + 1
        gy = int((self._vy.max() - self._miny) // s) + 1
        self._grid_shape = (gx, gy)
        cells = {}
        for i in range(len(self.segments)):
            lo, hi = self._ptr[i], self._ptr[i + 1]
            for j in range(lo, hi - 1):
                x0 = min(self._vx[j], self._vx[j + 1])
                x1 = max(self._vx[j], self._vx[j + 1])
                y0 = min(self._vy[j], self._vy[j + 1])
                y1 = max(self._vy[j], self._vy[j + 1])
                for cx in range(int((x0 - self._minx) // s), int((x1 - self._minx) // s) + 1):
                    for cy in range(int((y0 - self._miny) // s), int((y1 - self._miny) // s) + 1):
                        cells.setdefault((cx, cy), set()).add(i)
        self._grid = {c: np.array(sorted(v), dtype=np.int64) for c, v in cells.items()}

    def _build_csr(self):
        n = len(self.nodes)
        outgoing = [[] for _ in range(n)]
        for i in range(len(self.segments)):
            outgoing[self._from_idx[i]].append(i)
        indptr = np.zeros(n + 1, dtype=np.int64)
        out_to = np.empty(len(self.segments), dtype=np.int64)
        out_seg = np.empty(len(self.segments), dtype=np.int64)
        out_w = np.empty(len(self.segments), dtype=np.float64)
        pos = 0
        for u in range(n):
            for i in sorted(outgoing[u]):
                out_to[pos] = self._to_idx[i]
                out_seg[pos] = i
                out_w[pos] = self._length[i]
                pos += 1
            indptr[u + 1] = pos
        self._indptr, self._out_to, self._out_seg, self._out_w = indptr, out_to, out_seg, out_w

    # -- queries -----------------------------------------------------------

    def segment(self, segment_id) -> RoadSegment:
        return self.segments[self._seg_index(segment_id)]

    def _seg_index(self, segment_id):
        try:
            return self._seg_idx[segment_id]
        except KeyError:
            raise ValueError(f"unknown segment id {segment_id}") from None

    def project_point(self, point, segment_id) -> Projection:
        """Nearest point of one segment; ties between parts take the smaller offset."""
        i = self._seg_index(segment_id)
        idxs = np.array([i], dtype=np.int64)
        dist, off, qx, qy = kernels.project_onto_segments(
            float(point[0]), float(point[1]), self._vx, self._vy, self._vcum, self._ptr, idxs
        )
        return Projection(segment_id, (float(qx[0]), float(qy[0])), float(off[0]), float(dist[0]))

    def nearest_segments(self, point, k=DEFAULT_TOP_K) -> list:
        """k segments nearest to point by projection distance, ties to smaller id.

        Searches grid cells in expanding rings and stops once no farther ring
        can beat the current k-th best distance, so results equal a scan over
        every segment.
        """
        if not self.segments:
            raise ValueError("network has no segments")
        px, py = float(point[0]), float(point[1])
        s = self.cell_size
        cx = int((px - self._minx) // s)
        cy = int((py - self._miny) // s)
        gx, gy = self._grid_shape
        max_ring = max(cx, gx - 1 - cx, 0) + max(cy, gy - 1 - cy, 0) + max(gx, gy)
        seen = set()
        found = []  # (distance, segment id, offset, qx, qy)
        r = 0
        while r <= max_ring:
            batch = []
            for cell in self._ring_cells(cx, cy, r, gx, gy):
                for i in self._grid.get(cell, ()):
                    if i not in seen:
                        seen.add(i)
                        batch.append(i)
            if batch:
                idxs = np.array(batch, dtype=np.int64)
                dist, off, qx, qy = kernels.project_onto_segments(
                    px, py, self._vx, self._vy, self._vcum, self._ptr, idxs
                )
                for b, i in enumerate(batch):
                    found.append((float(dist[b]), int(self._seg_ids[i]), float(off[b]), float(qx[b]), float(qy[b])))
            if len(found) >= k:
                found.sort(key=lambda f: (f[0], f[1]))
                # cells in ring r+1 or farther are at least r*cell away
                if r * s > found[k - 1][0]:
                    break
            r += 1
        found.sort(key=lambda f: (f[0], f[1]))
        return [
            Projection(seg_id, (qx, qy), off, dist)
            for dist, seg_id, off, qx, qy in found[:k]
        ]

    @staticmethod
    def _ring_cells(cx, cy, r, gx, gy):
        if r == 0:
            if 0 <= cx < gx and 0 <= cy < gy:
                yield (cx, cy)
            return
        for x in range(cx - r, cx + r + 1):
            if 0 <= x < gx:
                if 0 <= cy - r < gy:
                    yield (x, cy - r)
                if 0 <= cy + r < gy:
                    yield (x, cy + r)
        for y in range(cy - r + 1, cy + r):
            if 0 <= y < gy:
                if 0 <= cx - r < gx:
                    yield (cx - r, y)
                if 0 <= cx + r < gx:
                    yield (cx + r, y)

    def adjacent_segments(self, segment_id) -> list:
        """Segments whose from node is this segment's to node."""
        i = self._seg_index(segment_id)
        v = self._to_idx[i]
        return [int(self._seg_ids[self._out_seg[e]]) for e in range(self._indptr[v], self._indptr[v + 1])]

    def _dijkstra_from(self, node_idx):
        hit = self._dij_cache.get(node_idx)
        if hit is None:
            hit = kernels.dijkstra_nodes(
                self._indptr, self._out_to, self._out_seg, self._out_w, len(self.nodes), node_idx
            )
            self._dij_cache[node_idx] = hit
        return hit

    def path_distance(self, a: Projection, b: Projection, slot) -> RoutePath | None:
        """Shortest driving route from projection a to projection b.

        Returns route length in meters, expected travel time in seconds for
        the given slot, and the traversed segment ids, or None when b cannot
        be reached from a.
        """
        ia = self._seg_index(a.segment_id)
        ib = self._seg_index(b.segment_id)
        sl = int(slot)
        if ia == ib and b.offset >= a.offset:
            d = b.offset - a.offset
            return RoutePath(d, d / self._speeds[ia, sl], [a.segment_id])
        tail = self._length[ia] - a.offset
        dist, pred = self._dijkstra_from(int(self._to_idx[ia]))
        mid = dist[self._from_idx[ib]]
        if not np.isfinite(mid):
            return None
        chain = []
        v = int(self._from_idx[ib])
        src = int(self._to_idx[ia])
        while v != src:
            e = int(pred[v])
            chain.append(e)
            v = int(self._from_idx[e])
        chain.reverse()
        total = tail + mid + b.offset
        time = tail / self._speeds[ia, sl] + b.offset / self._speeds[ib, sl]
        for e in chain:
            time += self._length[e] / self._speeds[e, sl]
        segs = [a.segment_id] + [int(self._seg_ids[e]) for e in chain] + [b.segment_id]
        return RoutePath(float(total), float(time), segs)

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        return {
            "nodes": [{"id": n.id, "x": n.x, "y": n.y} for n in self.nodes],
            "segments": [
                {
                    "id": s.id,
                    "from": s.from_node,
                    "to": s.to_node,
                    "polyline": [[float(x), float(y)] for x, y in s.polyline],
                    "speed": {
                        "morning": float(s.speeds[0]),
                        "evening": float(s.speeds[1]),
                        "normal": float(s.speeds[2]),
                    },
                }
                for s in self.segments
            ],
        }


def save_network(path, net: RoadNetwork):
    with open(path, "w") as f:
        json.dump(net.to_dict(), f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_network(path, cell_size=DEFAULT_CELL_SIZE_M) -> RoadNetwork:
    """Read a network document. Nodes carrying lat/lon are projected to meters."""
    with open(path) as f:
        doc = json.load(f)
    raw_nodes = doc["nodes"]
    geographic = bool(raw_nodes) and "lat" in raw_nodes[0]
    if geographic:
        ll = np.array([[n["lat"], n["lon"]] for n in raw_nodes], dtype=np.float64)
        xy, origin = planar_from_latlon(ll)
        nodes = [Node(n["id"], float(x), float(y)) for n, (x, y) in zip(raw_nodes, xy)]
    else:
        nodes = [Node(n["id"], float(n["x"]), float(n["y"])) for n in raw_nodes]
    segments = []
    for s in doc["segments"]:
        poly = np.asarray(s["polyline"], dtype=np.float64)
        if geographic:
            poly, _ = planar_from_latlon(poly, origin)
        segments.append(RoadSegment(s["id"], s["from"], s["to"], poly, s["speed"]))
    return RoadNetwork(nodes, segments, cell_size=cell_size)
