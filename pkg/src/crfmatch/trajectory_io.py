"""Trajectory, label, and path file handling plus downsampling."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

TRAJ_HEADER = ["vehicle_id", "trip_id", "x", "y", "t"]
LABEL_HEADER = ["vehicle_id", "trip_id", "point_index", "segment_id"]
PATH_HEADER = ["vehicle_id", "trip_id", "seq", "segment_id"]
MATCH_HEADER = ["vehicle_id", "trip_id", "point_index", "matched_segment_id"]


@dataclass
class Trajectory:
    """GPS observations of one trip, ordered by strictly increasing time."""

    vehicle_id: str
    trip_id: str
    xy: np.ndarray  # (T, 2) planar meters
    t: np.ndarray  # (T,) whole seconds

    def __post_init__(self):
        self.xy = np.asarray(self.xy, dtype=np.float64).reshape(-1, 2)
        self.t = np.asarray(self.t, dtype=np.int64)

    def __len__(self):
        return len(self.t)

    @property
    def key(self):
        return (self.vehicle_id, self.trip_id)


@dataclass
class LabeledTrajectory:
    traj: Trajectory
    labels: np.ndarray = field(default=None)  # (T,) true segment id per point
    path: list = field(default=None)  # true traversed segment ids


def average_interval(traj: Trajectory) -> float:
    """Mean sampling gap in seconds. Undefined for a single point."""
    if len(traj) < 2:
        raise ValueError(f"trajectory {traj.key}: average interval needs at least 2 points")
    return float(traj.t[-1] - traj.t[0]) / (len(traj) - 1)


def downsample_indices(t, interval) -> np.ndarray:
    """Indices kept when thinning timestamps t to a target sampling interval.

    Keeps the first point, then greedily each point at least interval seconds
    after the last kept one, and always the final point.
    """
    t = np.asarray(t)
    if len(t) == 0:
        return np.empty(0, dtype=np.int64)
    kept = [0]
    for i in range(1, len(t)):
        if t[i] - t[kept[-1]] >= interval:
            kept.append(i)
    if kept[-1] != len(t) - 1:
        kept.append(len(t) - 1)
    return np.array(kept, dtype=np.int64)


def downsample(traj: Trajectory, interval) -> Trajectory:
    idx = downsample_indices(traj.t, interval)
    return Trajectory(traj.vehicle_id, traj.trip_id, traj.xy[idx], traj.t[idx])


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def save_trajectories(path, trajs):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(TRAJ_HEADER)
        for tr in trajs:
            for (x, y), t in zip(tr.xy, tr.t):
                w.writerow([tr.vehicle_id, tr.trip_id, _fmt(x), _fmt(y), int(t)])


def load_trajectories(path) -> list:
    """Parse a trajectory file into one Trajectory per (vehicle, trip).

    Rows may be interleaved across trips; points are ordered by time.  A
    malformed row or a duplicate timestamp within a trip raises with the
    offending line number.
    """
    groups = {}
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != TRAJ_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRAJ_HEADER)}")
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            try:
                veh, trip = row[0], row[1]
                x, y, t = float(row[2]), float(row[3]), int(row[4])
                if len(row) != 5 or not veh or not trip:
                    raise ValueError
            except (ValueError, IndexError):
                raise ValueError(f"{path}: malformed row at line {lineno}") from None
            groups.setdefault((veh, trip), []).append((t, x, y, lineno))
    out = []
    for (veh, trip), pts in groups.items():
        pts.sort(key=lambda p: p[0])
        for a, b in zip(pts, pts[1:]):
            if a[0] == b[0]:
                raise ValueError(
                    f"{path}: duplicate timestamp {a[0]} in trip ({veh}, {trip}) at line {b[3]}"
                )
        xy = np.array([[p[1], p[2]] for p in pts], dtype=np.float64)
        t = np.array([p[0] for p in pts], dtype=np.int64)
        out.append(Trajectory(veh, trip, xy, t))
    return out


def _load_indexed(path, header, kind):
    groups = {}
    with open(path, newline="") as f:
        r = csv.reader(f)
        got = next(r, None)
        if got != header:
            raise ValueError(f"{path}: expected header {','.join(header)}")
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            try:
                veh, trip, idx, seg = row[0], row[1], int(row[2]), int(row[3])
            except (ValueError, IndexError):
                raise ValueError(f"{path}: malformed row at line {lineno}") from None
            groups.setdefault((veh, trip), []).append((idx, seg))
    out = {}
    for key, rows in groups.items():
        rows.sort(key=lambda p: p[0])
        if [i for i, _ in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: {kind} indices for {key} are not contiguous from 0")
        out[key] = np.array([seg for _, seg in rows], dtype=np.int64)
    return out


def load_labels(path) -> dict:
    """Per-point true segment ids keyed by (vehicle_id, trip_id)."""
    return _load_indexed(path, LABEL_HEADER, "label")


def save_labels(path, labels):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(LABEL_HEADER)
        for (veh, trip), segs in labels.items():
            for i, seg in enumerate(segs):
                w.writerow([veh, trip, i, int(seg)])


def load_matches(path) -> dict:
    """Matched segment ids per point keyed by (vehicle_id, trip_id)."""
    return _load_indexed(path, MATCH_HEADER, "match")


def save_matches(path, matches):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(MATCH_HEADER)
        for (veh, trip), segs in matches.items():
            for i, seg in enumerate(segs):
                w.writerow([veh, trip, i, int(seg)])


def load_paths(path) -> dict:
    """Traversed segment id sequences keyed by (vehicle_id, trip_id)."""
    return {k: list(map(int, v)) for k, v in _load_indexed(path, PATH_HEADER, "path").items()}


def save_paths(path, paths):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(PATH_HEADER)
        for (veh, trip), segs in paths.items():
            for i, seg in enumerate(segs):
                w.writerow([veh, trip, i, int(seg)])
