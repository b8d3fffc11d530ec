"""Benchmark the compiled kernels against the pure NumPy reference.

Runs each hot kernel on a representative workload with both backends and
prints a speedup table.  The compiled backend is exercised only when numba
imports; run with CRFMATCH_PURE_NUMPY unset so both sides are available.

    python3 benchmarks/bench_kernels.py [--grid 30] [--repeats 5]
"""

import argparse
import time

import numpy as np

from crfmatch.kernels import _numpy as knp
from crfmatch.road_network import Node, RoadNetwork, RoadSegment

try:
    from crfmatch.kernels import _numba as knb
except ImportError:
    knb = None


def grid_network(n: int) -> RoadNetwork:
    rng = np.random.default_rng(0)
    nodes = [
        Node(j * n + i, i * 200.0 + rng.uniform(-20, 20), j * 200.0 + rng.uniform(-20, 20))
        for j in range(n)
        for i in range(n)
    ]
    segments = []
    for j in range(n):
        for i in range(n):
            u = j * n + i
            for v in ([u + 1] if i + 1 < n else []) + ([u + n] if j + 1 < n else []):
                poly = np.array([[nodes[u].x, nodes[u].y], [nodes[v].x, nodes[v].y]])
                speeds = np.full(3, rng.uniform(6.0, 14.0))
                segments.append(RoadSegment(len(segments), u, v, poly, speeds.copy()))
                segments.append(RoadSegment(len(segments), v, u, poly[::-1].copy(), speeds.copy()))
    return RoadNetwork(nodes, segments)


def random_lattice_arrays(rng, T: int, k: int):
    counts = np.full(T, k, dtype=np.int64)
    phi = rng.uniform(0.0, 1.0, (T, k))
    d1 = rng.uniform(0.0, 1.0, (T - 1, k, k))
    d2 = rng.uniform(0.0, 1.0, (T - 1, k, k))
    node = 2.0 * phi
    edge = d1 + d2
    return phi, d1, d2, node, edge, counts


def timed(fn, repeats: int) -> float:
    fn()  # warm up: jit compilation and caches stay out of the clock
    best = np.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def build_workloads(grid: int):
    net = grid_network(grid)
    rng = np.random.default_rng(1)
    span = (grid - 1) * 200.0
    pts = rng.uniform(0.0, span, (100, 2))
    all_segs = np.arange(len(net.segments), dtype=np.int64)
    sources = rng.integers(0, len(net.nodes), 200)
    lattices = [random_lattice_arrays(rng, 50, 6) for _ in range(300)]

    def projection(k):
        def run():
            for px, py in pts:
                k.project_onto_segments(px, py, net._vx, net._vy, net._vcum, net._ptr, all_segs)
        return run

    def dijkstra(k):
        def run():
            for s in sources:
                k.dijkstra_nodes(
                    net._indptr, net._out_to, net._out_seg, net._out_w, len(net.nodes), int(s)
                )
        return run

    def viterbi(k):
        def run():
            for _, _, _, node, edge, counts in lattices:
                k.viterbi_decode(node, edge, counts)
        return run

    def partition(k):
        def run():
            for _, _, _, node, edge, counts in lattices:
                k.forward_log_partition(node, edge, counts)
        return run

    def expectations(k):
        def run():
            for phi, d1, d2, node, edge, counts in lattices:
                k.crf_expectations(phi, d1, d2, node, edge, counts)
        return run

    return [
        (f"project_onto_segments ({len(pts)} pts x {len(all_segs)} segs)", projection),
        (f"dijkstra_nodes ({len(sources)} sources, {len(net.nodes)} nodes)", dijkstra),
        ("viterbi_decode (300 lattices, 50x6)", viterbi),
        ("forward_log_partition (300 lattices, 50x6)", partition),
        ("crf_expectations (300 lattices, 50x6)", expectations),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=30, help="grid side length (default 30)")
    ap.add_argument("--repeats", type=int, default=5, help="timed repeats, best kept (default 5)")
    args = ap.parse_args()

    if knb is None:
        print("numba backend unavailable; timing the NumPy reference only\n")

    width = 58
    header = f"{'kernel':<{width}} {'numpy':>9} {'numba':>9} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, make in build_workloads(args.grid):
        t_np = timed(make(knp), args.repeats)
        if knb is not None:
            t_nb = timed(make(knb), args.repeats)
            print(f"{name:<{width}} {t_np * 1e3:>7.1f}ms {t_nb * 1e3:>7.1f}ms {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<{width}} {t_np * 1e3:>7.1f}ms {'-':>9} {'-':>8}")


if __name__ == "__main__":
    main()
