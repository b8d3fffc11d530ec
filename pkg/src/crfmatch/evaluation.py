"""Accuracy metrics, repeated-path statistics, HMM baseline, interval sweeps."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import crf
from .features import build_lattice
from .pipeline import MatcherConfig, match_lattice
from .slots import slot_of
from .trajectory_io import Trajectory, downsample_indices

DEFAULT_ZETA = 0.8
REPORT_HEADER = ["matcher", "interval_s", "A_s", "A_r", "n_points", "n_paths"]


@dataclass
class ReportRow:
    matcher: str
    interval_s: float
    a_s: float
    a_r: float
    n_points: int
    n_paths: int


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)

    def breakdown(self, matcher) -> dict:
        return {r.interval_s: (r.a_s, r.a_r) for r in self.rows if r.matcher == matcher}


def accuracy_by_segment(matched, truth) -> float:
    """Fraction of points whose matched segment equals the label."""
    if len(matched) != len(truth):
        raise ValueError(f"matched {len(matched)} trajectories but truth has {len(truth)}")
    correct = 0
    total = 0
    for m, t in zip(matched, truth):
        m = np.asarray(m)
        t = np.asarray(t)
        if len(m) != len(t):
            raise ValueError(f"misaligned lengths: {len(m)} matched vs {len(t)} labeled points")
        correct += int((m == t).sum())
        total += len(t)
    if total == 0:
        raise ValueError("no labeled points to evaluate")
    return correct / total


def accuracy_by_path(matched, truth) -> float:
    """Fraction of trajectories matched perfectly at every point."""
    if len(matched) != len(truth):
        raise ValueError(f"matched {len(matched)} trajectories but truth has {len(truth)}")
    if len(matched) == 0:
        raise ValueError("no trajectories to evaluate")
    ok = 0
    for m, t in zip(matched, truth):
        m = np.asarray(m)
        t = np.asarray(t)
        if len(m) != len(t):
            raise ValueError(f"misaligned lengths: {len(m)} matched vs {len(t)} labeled points")
        ok += int(bool((m == t).all()))
    return ok / len(matched)


def repeat_ratio(candidate, history) -> float:
    """Share of the candidate path's segment set found in the history path."""
    cand = set(candidate)
    if not cand:
        raise ValueError("candidate path is empty")
    return len(cand & set(history)) / len(cand)


def repeated_path_share(paths, zeta: float = DEFAULT_ZETA) -> float:
    """Fraction of one vehicle's paths preceded by a similar-enough path.

    A path counts when some EARLIER path overlaps it above zeta; the first
    path never counts.
    """
    paths = list(paths)
    if not paths:
        raise ValueError("need at least one path")
    repeated = 0
    for c in range(1, len(paths)):
        if any(repeat_ratio(paths[c], paths[h]) > zeta for h in range(c)):
            repeated += 1
    return repeated / len(paths)


def hmm_from_lattice(lattice) -> crf.MatchResult:
    """Baseline decode: emission is the generative feature, transition the
    spatial feature, both at unit weight and untrained."""
    a = crf.decode(lattice.phi, lattice.d1, lattice.counts)
    score = float(lattice.phi[np.arange(len(lattice)), a].sum())
    for t in range(len(lattice) - 1):
        score += lattice.d1[t, a[t], a[t + 1]]
    return crf.result_from_assignment(lattice, a, score)


def hmm_baseline_match(net, traj, cfg: MatcherConfig | None = None) -> crf.MatchResult:
    cfg = cfg or MatcherConfig()
    lattice = build_lattice(net, traj, k=cfg.k, scale_m=cfg.scale_m, cutoff_m=cfg.cutoff_m)
    return hmm_from_lattice(lattice)


KNOWN_MATCHERS = ("crf", "crf_rpm", "hmm")


def interval_sweep(
    net,
    labeled,
    params: crf.CrfParams,
    cfg: MatcherConfig | None = None,
    tables=None,
    intervals=(60,),
    matchers=("crf",),
    jobs: int | None = None,
) -> EvalReport:
    """Downsample, match with each requested matcher, score per interval.

    labeled is a list of LabeledTrajectory with per-point labels aligned to
    the native points; labels are subset alongside the kept points.
    """
    cfg = cfg or MatcherConfig()
    for m in matchers:
        if m not in KNOWN_MATCHERS:
            raise ValueError(f"unknown matcher {m!r}; expected one of {KNOWN_MATCHERS}")
    jobs = jobs or os.cpu_count() or 1
    report = EvalReport()
    for interval in intervals:
        thinned = []
        for lt in labeled:
            idx = downsample_indices(lt.traj.t, interval)
            dtraj = Trajectory(
                lt.traj.vehicle_id, lt.traj.trip_id, lt.traj.xy[idx], lt.traj.t[idx]
            )
            thinned.append((dtraj, lt.labels[idx]))

        def build(pair):
            dtraj, _ = pair
            return build_lattice(net, dtraj, k=cfg.k, scale_m=cfg.scale_m, cutoff_m=cfg.cutoff_m)

        if jobs > 1 and len(thinned) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                lattices = list(ex.map(build, thinned))
        else:
            lattices = [build(p) for p in thinned]

        for matcher in matchers:
            matched = []
            for lattice, (dtraj, _) in zip(lattices, thinned):
                if matcher == "hmm":
                    res = hmm_from_lattice(lattice)
                else:
                    use_pref = (
                        matcher == "crf_rpm"
                        and tables is not None
                        and len(dtraj) >= 2
                        and (dtraj.t[-1] - dtraj.t[0]) / (len(dtraj) - 1) >= cfg.interval_threshold_s
                    )
                    res = match_lattice(
                        lattice,
                        params,
                        cfg,
                        tables=tables,
                        use_preference=use_pref,
                        vehicle=dtraj.vehicle_id,
                        slot=slot_of(int(dtraj.t[0])),
                    )
                matched.append(res.matched_segments)
            truths = [lab for _, lab in thinned]
            report.rows.append(
                ReportRow(
                    matcher,
                    float(interval),
                    accuracy_by_segment(matched, truths),
                    accuracy_by_path(matched, truths),
                    int(sum(len(t) for t in truths)),
                    len(truths),
                )
            )
    return report


def write_report(path, report: EvalReport):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(REPORT_HEADER)
        for r in report.rows:
            w.writerow(
                [r.matcher, f"{r.interval_s:g}", f"{r.a_s:.6f}", f"{r.a_r:.6f}", r.n_points, r.n_paths]
            )


def load_report(path) -> EvalReport:
    report = EvalReport()
    with open(path, newline="") as f:
        r = csv.reader(f)
        header = next(r, None)
        if header != REPORT_HEADER:
            raise ValueError(f"{path}: expected header {','.join(REPORT_HEADER)}")
        for row in r:
            if not row:
                continue
            report.rows.append(
                ReportRow(row[0], float(row[1]), float(row[2]), float(row[3]), int(row[4]), int(row[5]))
            )
    return report
