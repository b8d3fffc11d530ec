"""CRF feature functions and candidate lattice construction.

The observation feature scores how close a GPS point lies to a candidate
segment.  Two transition features score consecutive candidate pairs: a
spatial one comparing straight-line displacement against route distance, and
a temporal one comparing the observed time gap against the expected travel
time at segment speeds.  All three live in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .road_network import DEFAULT_TOP_K, RoadNetwork, RoutePath
from .slots import slot_of
from .trajectory_io import Trajectory

DEFAULT_SCALE_M = 20.0
DEFAULT_CUTOFF_M = 500.0


def generative_feature(distance_m: float, scale_m: float = DEFAULT_SCALE_M) -> float:
    """exp(-(d / scale)^2): 1 on the segment, decaying with projection distance."""
    r = distance_m / scale_m
    return math.exp(-(r * r))


def spatial_feature(d_euclid: float, route: RoutePath | None) -> float:
    """Squared ratio of straight-line displacement to route distance, in [0, 1].

    Unreachable pairs score 0.  A zero-length route scores 1: either both
    projections coincide, or the ratio is unbounded and clamps to 1.
    """
    if route is None:
        return 0.0
    if route.distance == 0.0:
        return 1.0
    r = d_euclid / route.distance
    return min(1.0, r * r)


def temporal_feature(dt_observed: float, dt_expected: float) -> float:
    """Squared ratio of the smaller to the larger time gap; 1 when they agree."""
    if dt_expected == 0.0:
        return 1.0
    r = min(dt_observed, dt_expected) / max(dt_observed, dt_expected)
    return r * r


def transition_weight(delta1: float, delta2: float, lambda1: float, lambda2: float) -> float:
    """Weighted sum of the spatial and temporal transition features."""
    return lambda1 * delta1 + lambda2 * delta2


@dataclass
class CandidateLattice:
    """Per-point candidates and precomputed feature tensors for one trajectory.

    Layer t holds counts[t] candidates; arrays are padded to the k limit.
    link_paths[t][(i, j)] stores the traversed segment ids of the shortest
    route between candidate i of layer t and candidate j of layer t+1
    (reachable pairs only).
    """

    vehicle_id: str
    trip_id: str
    t: np.ndarray
    counts: np.ndarray  # (T,)
    seg_ids: np.ndarray  # (T, k), -1 padded
    phi: np.ndarray  # (T, k)
    d1: np.ndarray  # (T-1, k, k)
    d2: np.ndarray  # (T-1, k, k)
    reachable: np.ndarray  # (T-1, k, k) bool
    link_paths: list
    projections: list

    def __len__(self):
        return len(self.counts)

    @property
    def key(self):
        return (self.vehicle_id, self.trip_id)


def build_lattice(
    net: RoadNetwork,
    traj: Trajectory,
    k: int = DEFAULT_TOP_K,
    scale_m: float = DEFAULT_SCALE_M,
    cutoff_m: float = DEFAULT_CUTOFF_M,
) -> CandidateLattice:
    """Candidate layers plus feature tensors for one trajectory.

    Raises when some point lies farther than cutoff_m from every segment.
    The slot used for expected travel times is the slot of the earlier
    observation of each transition.
    """
    T = len(traj)
    if T == 0:
        raise ValueError(f"trajectory {traj.key}: empty")
    counts = np.zeros(T, dtype=np.int64)
    seg_ids = np.full((T, k), -1, dtype=np.int64)
    phi = np.zeros((T, k), dtype=np.float64)
    projections = []
    for t in range(T):
        cands = net.nearest_segments(traj.xy[t], k=k)
        if cands[0].distance > cutoff_m:
            raise ValueError(
                f"trajectory {traj.key}: point {t} is {cands[0].distance:.0f} m "
                f"from the nearest segment (cutoff {cutoff_m:.0f} m)"
            )
        projections.append(cands)
        counts[t] = len(cands)
        for i, c in enumerate(cands):
            seg_ids[t, i] = c.segment_id
            phi[t, i] = generative_feature(c.distance, scale_m)

    d1 = np.zeros((max(T - 1, 0), k, k), dtype=np.float64)
    d2 = np.zeros((max(T - 1, 0), k, k), dtype=np.float64)
    reachable = np.zeros((max(T - 1, 0), k, k), dtype=bool)
    link_paths = []
    for t in range(T - 1):
        links = {}
        dt_obs = float(traj.t[t + 1] - traj.t[t])
        slot = slot_of(traj.t[t])
        d_euclid = float(np.hypot(*(traj.xy[t + 1] - traj.xy[t])))
        for i in range(counts[t]):
            for j in range(counts[t + 1]):
                route = net.path_distance(projections[t][i], projections[t + 1][j], slot)
                if route is None:
                    continue
                d1[t, i, j] = spatial_feature(d_euclid, route)
                d2[t, i, j] = temporal_feature(dt_obs, route.travel_time)
                reachable[t, i, j] = True
                links[(i, j)] = route.segments
        link_paths.append(links)

    return CandidateLattice(
        traj.vehicle_id, traj.trip_id, traj.t.copy(), counts, seg_ids, phi, d1, d2,
        reachable, link_paths, projections,
    )
