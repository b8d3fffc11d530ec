"""crfmatch command line: gen, train, build-idt, match, eval, sweep.

Every command writes a manifest.json of its fully resolved configuration into
--out-dir so runs are reproducible.  Config file values override defaults and
flags override the config file.  Exit codes: 0 success, 1 input error, 2
internal error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

from . import crf, evaluation, preference, synth, trajectory_io
from .pipeline import MatcherConfig, match_batch
from .features import build_lattice
from .road_network import load_network, save_network

DEFAULTS = {
    "interval_threshold_s": 180.0,
    "alpha": 0.7,
    "k": 6,
    "scale_m": 20.0,
    "zeta": 0.8,
    "x_sat": 50.0,
    "cutoff_m": 500.0,
    "normalized_preference": False,
}


def _load_config(path):
    if not path:
        return {}
    with open(path) as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config must be a JSON object")
    return doc


def _resolve(args, config) -> dict:
    resolved = dict(DEFAULTS)
    for key in DEFAULTS:
        if key in config:
            resolved[key] = config[key]
    overrides = {
        "interval_threshold_s": getattr(args, "threshold", None),
        "alpha": getattr(args, "alpha", None),
        "k": getattr(args, "k", None),
        "scale_m": getattr(args, "scale", None),
        "x_sat": getattr(args, "x_sat", None),
    }
    for key, val in overrides.items():
        if val is not None:
            resolved[key] = val
    return resolved


def _matcher_config(resolved) -> MatcherConfig:
    return MatcherConfig(
        interval_threshold_s=float(resolved["interval_threshold_s"]),
        alpha=float(resolved["alpha"]),
        k=int(resolved["k"]),
        scale_m=float(resolved["scale_m"]),
        cutoff_m=float(resolved["cutoff_m"]),
        x_sat=float(resolved["x_sat"]),
        normalized_preference=bool(resolved["normalized_preference"]),
    )


def _write_manifest(out_dir, command, seed, resolved):
    doc = {"command": command, "seed": seed, "config": resolved}
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def _ensure_out_dir(args) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return args.out_dir


def _labeled_maps(world):
    trajs, labels, paths = [], {}, {}
    for lt in world:
        trajs.append(lt.traj)
        labels[lt.traj.key] = lt.labels
        paths[lt.traj.key] = lt.path
    return trajs, labels, paths


def cmd_gen(args) -> int:
    out = _ensure_out_dir(args)
    config = _load_config(args.config)
    world_cfg = dict(config.get("world", {}))
    kind = world_cfg.pop("type", "grid")
    if args.seed is not None:
        world_cfg["seed"] = args.seed
    if kind == "grid":
        cfg = synth.WorldConfig(**world_cfg)
        world = synth.generate_synthetic(cfg)
        history = [st.labeled for st in world.history]
    elif kind == "corridor":
        cfg = synth.CorridorConfig(**world_cfg)
        world = synth.generate_corridor(cfg)
        history = []
    else:
        raise ValueError(f"unknown world type {kind!r}; expected grid or corridor")

    save_network(os.path.join(out, "network.json"), world.net)
    for name, group in (("history", history), ("eval", world.trips)):
        trajs, labels, paths = _labeled_maps(group)
        trajectory_io.save_trajectories(os.path.join(out, f"{name}_trajectories.csv"), trajs)
        trajectory_io.save_labels(os.path.join(out, f"{name}_labels.csv"), labels)
        trajectory_io.save_paths(os.path.join(out, f"{name}_paths.csv"), paths)

    resolved = _resolve(args, config)
    resolved["world"] = {"type": kind, **dataclasses.asdict(cfg)}
    _write_manifest(out, "gen", cfg.seed, resolved)
    print(json.dumps({"history_trips": len(history), "eval_trips": len(world.trips)}))
    return 0


def _load_labeled(traj_path, label_path):
    trajs = trajectory_io.load_trajectories(traj_path)
    labels = trajectory_io.load_labels(label_path)
    out = []
    for tr in trajs:
        if tr.key not in labels:
            raise ValueError(f"{label_path}: no labels for trip {tr.key}")
        if len(labels[tr.key]) != len(tr):
            raise ValueError(f"{label_path}: label count mismatch for trip {tr.key}")
        out.append(trajectory_io.LabeledTrajectory(tr, labels[tr.key], None))
    return out


def cmd_train(args) -> int:
    out = _ensure_out_dir(args)
    config = _load_config(args.config)
    resolved = _resolve(args, config)
    cfg = _matcher_config(resolved)
    net = load_network(args.network)
    labeled = _load_labeled(args.trajectories, args.labels)
    if args.interval:
        thinned = []
        for lt in labeled:
            idx = trajectory_io.downsample_indices(lt.traj.t, args.interval)
            thinned.append(
                trajectory_io.LabeledTrajectory(
                    trajectory_io.Trajectory(
                        lt.traj.vehicle_id, lt.traj.trip_id, lt.traj.xy[idx], lt.traj.t[idx]
                    ),
                    lt.labels[idx],
                    None,
                )
            )
        labeled = thinned
    lattices = [
        build_lattice(net, lt.traj, k=cfg.k, scale_m=cfg.scale_m, cutoff_m=cfg.cutoff_m)
        for lt in labeled
    ]
    result = crf.train(
        lattices,
        [lt.labels for lt in labeled],
        tol=args.tol,
        max_iters=args.max_iters,
        l2=args.l2,
    )
    crf.save_params(os.path.join(out, "params.json"), result.params, scale_m=cfg.scale_m)
    with open(os.path.join(out, "train_report.json"), "w") as f:
        json.dump(
            {
                "iterations": result.iterations,
                "converged": result.converged,
                "skipped": result.skipped,
                "log_likelihood": result.log_likelihood,
                "examples": len(lattices) - result.skipped,
            },
            f,
            sort_keys=True,
            indent=1,
        )
        f.write("\n")
    resolved["train"] = {"interval": args.interval, "tol": args.tol,
                         "max_iters": args.max_iters, "l2": args.l2}
    _write_manifest(out, "train", args.seed, resolved)
    print(json.dumps({"mu": result.params.mu, "lambda1": result.params.lambda1,
                      "lambda2": result.params.lambda2, "iterations": result.iterations}))
    return 0


def cmd_build_idt(args) -> int:
    out = _ensure_out_dir(args)
    config = _load_config(args.config)
    paths = trajectory_io.load_paths(args.paths)
    trajs = {tr.key: tr for tr in trajectory_io.load_trajectories(args.trajectories)}
    history = []
    for key, path in paths.items():
        if key not in trajs:
            raise ValueError(f"{args.trajectories}: no trajectory for path {key}")
        history.append((key[0], int(trajs[key].t[0]), path))
    tables = preference.build_tables(history)
    preference.save_tables(out, tables)
    _write_manifest(out, "build-idt", args.seed, _resolve(args, config))
    print(json.dumps({"paths": len(history)}))
    return 0


def cmd_match(args) -> int:
    out = _ensure_out_dir(args)
    config = _load_config(args.config)
    resolved = _resolve(args, config)
    net = load_network(args.network)
    params, file_scale = crf.load_params(args.params)
    if args.scale is None and "scale_m" not in config:
        resolved["scale_m"] = file_scale
    cfg = _matcher_config(resolved)
    trajs = trajectory_io.load_trajectories(args.trajectories)
    tables = preference.load_tables(args.idt_dir) if args.idt_dir else None
    results, errors, summary = match_batch(
        net, trajs, params, cfg, tables=tables, jobs=args.jobs
    )
    matches = {(r.vehicle_id, r.trip_id): r.matched_segments for r in results}
    stitched = {(r.vehicle_id, r.trip_id): r.stitched_path for r in results}
    trajectory_io.save_matches(os.path.join(out, "matches.csv"), matches)
    trajectory_io.save_paths(os.path.join(out, "matched_paths.csv"), stitched)
    if errors:
        with open(os.path.join(out, "errors.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["vehicle_id", "trip_id", "error"])
            for (veh, trip), msg in errors:
                w.writerow([veh, trip, msg])
    _write_manifest(out, "match", args.seed, resolved)
    print(json.dumps(dataclasses.asdict(summary)))
    return 0


def cmd_eval(args) -> int:
    out = _ensure_out_dir(args)
    config = _load_config(args.config)
    matches = trajectory_io.load_matches(args.matches)
    labels = trajectory_io.load_labels(args.labels)
    keys = list(matches)
    missing = [k for k in keys if k not in labels]
    if missing:
        raise ValueError(f"{args.labels}: no labels for matched trip {missing[0]}")
    matched = [matches[k] for k in keys]
    truth = [labels[k] for k in keys]
    a_s = evaluation.accuracy_by_segment(matched, truth)
    a_r = evaluation.accuracy_by_path(matched, truth)
    report = evaluation.EvalReport(
        [
            evaluation.ReportRow(
                args.name,
                float(args.interval_s),
                a_s,
                a_r,
                sum(len(t) for t in truth),
                len(truth),
            )
        ]
    )
    evaluation.write_report(os.path.join(out, "report.csv"), report)
    if args.details:
        with open(os.path.join(out, "details.csv"), "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["vehicle_id", "trip_id", "n_points", "n_correct", "path_exact"])
            for k, m, t in zip(keys, matched, truth):
                correct = int((m == t).sum())
                w.writerow([k[0], k[1], len(t), correct, int(correct == len(t))])
    _write_manifest(out, "eval", args.seed, _resolve(args, config))
    print(json.dumps({"A_s": a_s, "A_r": a_r, "n_paths": len(truth)}))
    return 0


def cmd_sweep(args) -> int:
    out = _ensure_out_dir(args)
    config = _load_config(args.config)
    resolved = _resolve(args, config)
    net = load_network(args.network)
    params, file_scale = crf.load_params(args.params)
    if args.scale is None and "scale_m" not in config:
        resolved["scale_m"] = file_scale
    cfg = _matcher_config(resolved)
    labeled = _load_labeled(args.trajectories, args.labels)
    tables = preference.load_tables(args.idt_dir) if args.idt_dir else None
    intervals = [float(x) for x in args.intervals.split(",")]
    matchers = args.matchers.split(",")
    report = evaluation.interval_sweep(
        net, labeled, params, cfg, tables=tables,
        intervals=intervals, matchers=matchers, jobs=args.jobs,
    )
    evaluation.write_report(os.path.join(out, "report.csv"), report)
    resolved["sweep"] = {"intervals": intervals, "matchers": matchers}
    _write_manifest(out, "sweep", args.seed, resolved)
    print(json.dumps({"rows": len(report.rows)}))
    return 0


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="crfmatch",
        description="CRF map matching with driver route preference mining",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=True):
        sp.add_argument("--seed", type=int, default=None, help="random seed (gen) / recorded for provenance")
        sp.add_argument("--config", default=None, help="JSON config file; flags override it")
        sp.add_argument("--out-dir", required=out_required, help="output directory")
        sp.add_argument("--jobs", type=int, default=None, help="worker threads (default: all cores)")

    def matcher_flags(sp):
        sp.add_argument("--threshold", type=float, default=None, help="sparse-interval gate, seconds (default 180)")
        sp.add_argument("--alpha", type=float, default=None, help="preference blend weight (default 0.7)")
        sp.add_argument("--k", type=int, default=None, help="candidates per point (default 6)")
        sp.add_argument("--scale", type=float, default=None, help="generative feature scale, meters (default 20)")
        sp.add_argument("--x-sat", dest="x_sat", type=float, default=None, help="experience saturation count (default 50)")

    sp = sub.add_parser("gen", help="generate a synthetic world with ground truth")
    common(sp)
    matcher_flags(sp)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("train", help="fit CRF weights on labeled trajectories")
    common(sp)
    matcher_flags(sp)
    sp.add_argument("--network", required=True)
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--interval", type=float, default=None, help="downsample training data first, seconds")
    sp.add_argument("--tol", type=float, default=crf.DEFAULT_TOL)
    sp.add_argument("--max-iters", type=int, default=crf.DEFAULT_MAX_ITERS)
    sp.add_argument("--l2", type=float, default=0.0)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("build-idt", help="build per-slot driver history tables from matched paths")
    common(sp)
    matcher_flags(sp)
    sp.add_argument("--paths", required=True, help="matched-paths or ground-truth paths file")
    sp.add_argument("--trajectories", required=True, help="trajectory file supplying trip start times")
    sp.set_defaults(func=cmd_build_idt)

    sp = sub.add_parser("match", help="match trajectories against a network")
    common(sp)
    matcher_flags(sp)
    sp.add_argument("--network", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--idt-dir", default=None, help="directory of idt_*.json history tables")
    sp.set_defaults(func=cmd_match)

    sp = sub.add_parser("eval", help="score a match file against labels")
    common(sp)
    matcher_flags(sp)
    sp.add_argument("--matches", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--name", default="crf", help="matcher name recorded in the report")
    sp.add_argument("--interval-s", dest="interval_s", type=float, default=0.0)
    sp.add_argument("--details", action="store_true", help="also write per-trajectory details.csv")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("sweep", help="downsample-match-score over a series of intervals")
    common(sp)
    matcher_flags(sp)
    sp.add_argument("--network", required=True)
    sp.add_argument("--params", required=True)
    sp.add_argument("--trajectories", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--idt-dir", default=None)
    sp.add_argument("--intervals", default="60,120,180,240,300,360,420")
    sp.add_argument("--matchers", default="crf,crf_rpm,hmm")
    sp.set_defaults(func=cmd_sweep)

    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as e:
        return 0 if not e.code else 1
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
