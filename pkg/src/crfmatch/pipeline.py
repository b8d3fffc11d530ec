"""End-to-end matcher: sparse-interval gate, preference superposition, decode.

A trajectory whose average sampling interval reaches the threshold is decoded
with transition scores blended with the driver's historical route preference
for the trip's time slot; below the threshold (or without history tables) it
is pure CRF decoding.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import crf
from .features import DEFAULT_CUTOFF_M, DEFAULT_SCALE_M, CandidateLattice, build_lattice
from .preference import DEFAULT_ALPHA, DEFAULT_X_SAT, experience, slot_of
from .road_network import DEFAULT_TOP_K, RoadNetwork
from .trajectory_io import Trajectory, average_interval

DEFAULT_INTERVAL_THRESHOLD_S = 180.0


@dataclass
class MatcherConfig:
    interval_threshold_s: float = DEFAULT_INTERVAL_THRESHOLD_S
    alpha: float = DEFAULT_ALPHA
    k: int = DEFAULT_TOP_K
    scale_m: float = DEFAULT_SCALE_M
    cutoff_m: float = DEFAULT_CUTOFF_M
    x_sat: float = DEFAULT_X_SAT
    normalized_preference: bool = False

    def __post_init__(self):
        if self.interval_threshold_s <= 0:
            raise ValueError("interval_threshold_s must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.k < 1:
            raise ValueError("k must be at least 1")


def preference_edge_scores(
    lattice: CandidateLattice, edge: np.ndarray, idt, vehicle, cfg: MatcherConfig
) -> np.ndarray:
    """Blend each transition score with the driver's preference for that
    candidate pair: alpha * h + (1 - alpha) * delta."""
    out = edge.copy()
    a = cfg.alpha
    for t in range(len(lattice) - 1):
        kn = lattice.counts[t + 1]
        next_cands = lattice.seg_ids[t + 1, :kn]
        for i in range(lattice.counts[t]):
            seg_m = int(lattice.seg_ids[t, i])
            f = experience(idt.traversal_count(vehicle, seg_m), cfg.x_sat)
            pair = [idt.ordered_pair_count(vehicle, seg_m, int(n)) for n in next_cands]
            denom = sum(pair) + (float(kn) if cfg.normalized_preference else 1.0)
            for j in range(kn):
                h = f * (pair[j] + 1.0) / denom
                out[t, i, j] = a * h + (1.0 - a) * edge[t, i, j]
    return out


def match_lattice(
    lattice: CandidateLattice,
    params: crf.CrfParams,
    cfg: MatcherConfig,
    tables=None,
    use_preference: bool = False,
    vehicle=None,
    slot=None,
) -> crf.MatchResult:
    node = crf.node_scores(lattice, params)
    edge = crf.edge_scores(lattice, params)
    if use_preference:
        edge = preference_edge_scores(lattice, edge, tables[slot], vehicle, cfg)
    a = crf.decode(node, edge, lattice.counts)
    score = float(node[np.arange(len(lattice)), a].sum())
    for t in range(len(lattice) - 1):
        score += edge[t, a[t], a[t + 1]]
    return crf.result_from_assignment(lattice, a, score, used_preference=use_preference)


def match_trajectory(
    net: RoadNetwork,
    traj: Trajectory,
    params: crf.CrfParams,
    cfg: MatcherConfig | None = None,
    tables=None,
) -> crf.MatchResult:
    """Match one trajectory. tables, when given, maps TimeSlot to the
    driver history table consulted on the sparse branch."""
    cfg = cfg or MatcherConfig()
    lattice = build_lattice(net, traj, k=cfg.k, scale_m=cfg.scale_m, cutoff_m=cfg.cutoff_m)
    sparse = (
        tables is not None
        and len(traj) >= 2
        and average_interval(traj) >= cfg.interval_threshold_s
    )
    return match_lattice(
        lattice,
        params,
        cfg,
        tables=tables,
        use_preference=sparse,
        vehicle=traj.vehicle_id,
        slot=slot_of(int(traj.t[0])),
    )


@dataclass
class BatchSummary:
    matched: int = 0
    failed: int = 0
    preference_branch: int = 0
    pure_crf: int = 0


def match_batch(
    net: RoadNetwork,
    trajs,
    params: crf.CrfParams,
    cfg: MatcherConfig | None = None,
    tables=None,
    jobs: int | None = None,
):
    """Match independently, preserving input order.

    Returns (results, errors, summary); a failing trajectory contributes an
    (key, message) entry instead of stopping the batch.
    """
    cfg = cfg or MatcherConfig()
    jobs = jobs or os.cpu_count() or 1

    def one(traj):
        try:
            return match_trajectory(net, traj, params, cfg, tables), None
        except ValueError as e:
            return None, (traj.key, str(e))

    if jobs > 1 and len(trajs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            outcomes = list(ex.map(one, trajs))
    else:
        outcomes = [one(tr) for tr in trajs]

    results = []
    errors = []
    summary = BatchSummary()
    for res, err in outcomes:
        if err is not None:
            errors.append(err)
            summary.failed += 1
            continue
        results.append(res)
        summary.matched += 1
        if res.used_preference:
            summary.preference_branch += 1
        else:
            summary.pure_crf += 1
    return results, errors, summary
