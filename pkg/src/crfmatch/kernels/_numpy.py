"""Pure NumPy reference implementations of the hot kernels.

Selected at import time by ``crfmatch.kernels`` when numba is unavailable or
disabled via the CRFMATCH_PURE_NUMPY environment flag.  Kept algorithmically
identical to the compiled versions so either backend yields the same output.
"""

import heapq

import numpy as np


def project_onto_segments(px, py, vx, vy, vcum, ptr, idxs):
    """Project point (px, py) onto each polyline named in idxs.

    vx, vy hold the vertex coordinates of every segment polyline flattened
    back to back, ptr gives the vertex range of segment i, vcum the arc
    length from the segment start to each vertex.

    Returns (dist, off, qx, qy) arrays aligned with idxs: distance to the
    nearest point of the polyline, arc-length offset of that point, and its
    coordinates.  Ties between parts go to the earlier part, hence the
    smaller offset.
    """
    n = len(idxs)
    dist = np.empty(n, dtype=np.float64)
    off = np.empty(n, dtype=np.float64)
    qx = np.empty(n, dtype=np.float64)
    qy = np.empty(n, dtype=np.float64)
    for out in range(n):
        s = int(idxs[out])
        lo, hi = int(ptr[s]), int(ptr[s + 1])
        best_d2 = np.inf
        best_off = 0.0
        best_x = vx[lo]
        best_y = vy[lo]
        for j in range(lo, hi - 1):
            ax, ay = vx[j], vy[j]
            bx, by = vx[j + 1], vy[j + 1]
            dx, dy = bx - ax, by - ay
            part_len2 = dx * dx + dy * dy
            if part_len2 > 0.0:
                t = ((px - ax) * dx + (py - ay) * dy) / part_len2
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            cx = ax + t * dx
            cy = ay + t * dy
            d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy)
            if d2 < best_d2:
                best_d2 = d2
                best_off = vcum[j] + t * np.sqrt(part_len2)
                best_x = cx
                best_y = cy
        dist[out] = np.sqrt(best_d2)
        off[out] = best_off
        qx[out] = best_x
        qy[out] = best_y
    return dist, off, qx, qy


def dijkstra_nodes(indptr, out_to, out_seg, out_w, n_nodes, source):
    """Single-source shortest paths over the segment-endpoint graph.

    Returns (dist, pred_seg) where pred_seg[v] is the segment index used to
    reach node v (-1 at the source and for unreachable nodes).  Ties are
    resolved by node index so results are deterministic.
    """
    dist = np.full(n_nodes, np.inf, dtype=np.float64)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for e in range(indptr[u], indptr[u + 1]):
            v = out_to[e]
            nd = d + out_w[e]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = out_seg[e]
                heapq.heappush(heap, (nd, v))
    return dist, pred


def viterbi_decode(node_scores, edge_scores, counts):
    """Best-scoring candidate assignment through the lattice.

    Ties prefer the smaller candidate index at the latest layer where the
    contenders differ, which the strict-greater comparisons below implement.
    """
    T = len(counts)
    k0 = counts[0]
    dp = node_scores[0, :k0].astype(np.float64)
    bps = []
    for t in range(1, T):
        kt = counts[t]
        kp = counts[t - 1]
        cand = dp[:kp, None] + edge_scores[t - 1, :kp, :kt]
        bp = np.argmax(cand, axis=0)
        dp = cand[bp, np.arange(kt)] + node_scores[t, :kt]
        bps.append(bp)
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = int(np.argmax(dp))
    for t in range(T - 2, -1, -1):
        path[t] = bps[t][path[t + 1]]
    return path


def _logsumexp(v):
    m = np.max(v)
    if not np.isfinite(m):
        return m
    return m + np.log(np.sum(np.exp(v - m)))


def forward_log_partition(node_scores, edge_scores, counts):
    """Log of the sum of exp(score) over every assignment."""
    T = len(counts)
    alpha = node_scores[0, : counts[0]].astype(np.float64)
    for t in range(1, T):
        kt = counts[t]
        kp = counts[t - 1]
        trans = alpha[:kp, None] + edge_scores[t - 1, :kp, :kt]
        m = trans.max(axis=0)
        alpha = m + np.log(np.exp(trans - m).sum(axis=0)) + node_scores[t, :kt]
    return float(_logsumexp(alpha))


def crf_expectations(phi, d1, d2, node_scores, edge_scores, counts):
    """Feature expectations under the lattice distribution.

    Returns (logZ, e_phi, e_d1, e_d2): expected sums of the observation
    feature and of both transition features, computed by forward-backward.
    """
    T = len(counts)
    alphas = []
    a = node_scores[0, : counts[0]].astype(np.float64)
    alphas.append(a)
    for t in range(1, T):
        kt, kp = counts[t], counts[t - 1]
        trans = alphas[-1][:, None] + edge_scores[t - 1, :kp, :kt]
        m = trans.max(axis=0)
        a = m + np.log(np.exp(trans - m).sum(axis=0)) + node_scores[t, :kt]
        alphas.append(a)
    log_z = float(_logsumexp(alphas[-1]))

    betas = [None] * T
    betas[T - 1] = np.zeros(counts[T - 1], dtype=np.float64)
    for t in range(T - 2, -1, -1):
        kt, kn = counts[t], counts[t + 1]
        trans = edge_scores[t, :kt, :kn] + node_scores[t + 1, :kn][None, :] + betas[t + 1][None, :]
        m = trans.max(axis=1)
        betas[t] = m + np.log(np.exp(trans - m[:, None]).sum(axis=1))

    e_phi = 0.0
    for t in range(T):
        marg = np.exp(alphas[t] + betas[t] - log_z)
        e_phi += float(np.sum(marg * phi[t, : counts[t]]))

    e_d1 = 0.0
    e_d2 = 0.0
    for t in range(T - 1):
        kt, kn = counts[t], counts[t + 1]
        lm = (
            alphas[t][:, None]
            + edge_scores[t, :kt, :kn]
            + node_scores[t + 1, :kn][None, :]
            + betas[t + 1][None, :]
            - log_z
        )
        marg = np.exp(lm)
        e_d1 += float(np.sum(marg * d1[t, :kt, :kn]))
        e_d2 += float(np.sum(marg * d2[t, :kt, :kn]))
    return log_z, e_phi, e_d1, e_d2
