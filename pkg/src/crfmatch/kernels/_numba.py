"""Numba-compiled hot kernels. Mirrors _numpy exactly; see that module for docs."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def project_onto_segments(px, py, vx, vy, vcum, ptr, idxs):
    n = len(idxs)
    dist = np.empty(n, dtype=np.float64)
    off = np.empty(n, dtype=np.float64)
    qx = np.empty(n, dtype=np.float64)
    qy = np.empty(n, dtype=np.float64)
    for out in range(n):
        s = idxs[out]
        lo = ptr[s]
        hi = ptr[s + 1]
        best_d2 = np.inf
        best_off = 0.0
        best_x = vx[lo]
        best_y = vy[lo]
        for j in range(lo, hi - 1):
            ax = vx[j]
            ay = vy[j]
            dx = vx[j + 1] - ax
            dy = vy[j + 1] - ay
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


@njit(cache=True, nogil=True)
def dijkstra_nodes(indptr, out_to, out_seg, out_w, n_nodes, source):
    dist = np.full(n_nodes, np.inf, dtype=np.float64)
    pred = np.full(n_nodes, -1, dtype=np.int64)
    dist[source] = 0.0
    cap = len(out_to) + 2
    hd = np.empty(cap, dtype=np.float64)  # heap keyed by (dist, node)
    hn = np.empty(cap, dtype=np.int64)
    hd[0] = 0.0
    hn[0] = source
    size = 1
    while size > 0:
        d = hd[0]
        u = hn[0]
        size -= 1
        hd[0] = hd[size]
        hn[0] = hn[size]
        # sift down
        i = 0
        while True:
            l = 2 * i + 1
            if l >= size:
                break
            r = l + 1
            c = l
            if r < size and (hd[r] < hd[l] or (hd[r] == hd[l] and hn[r] < hn[l])):
                c = r
            if hd[c] < hd[i] or (hd[c] == hd[i] and hn[c] < hn[i]):
                hd[i], hd[c] = hd[c], hd[i]
                hn[i], hn[c] = hn[c], hn[i]
                i = c
            else:
                break
        if d > dist[u]:
            continue
        for e in range(indptr[u], indptr[u + 1]):
            v = out_to[e]
            nd = d + out_w[e]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = out_seg[e]
                # sift up
                hd[size] = nd
                hn[size] = v
                i = size
                size += 1
                while i > 0:
                    p = (i - 1) // 2
                    if hd[i] < hd[p] or (hd[i] == hd[p] and hn[i] < hn[p]):
                        hd[i], hd[p] = hd[p], hd[i]
                        hn[i], hn[p] = hn[p], hn[i]
                        i = p
                    else:
                        break
    return dist, pred


@njit(cache=True, nogil=True)
def viterbi_decode(node_scores, edge_scores, counts):
    T = len(counts)
    K = node_scores.shape[1]
    dp = np.full((T, K), -np.inf, dtype=np.float64)
    bp = np.zeros((T, K), dtype=np.int64)
    for j in range(counts[0]):
        dp[0, j] = node_scores[0, j]
    for t in range(1, T):
        for j in range(counts[t]):
            best = -np.inf
            arg = 0
            for i in range(counts[t - 1]):
                v = dp[t - 1, i] + edge_scores[t - 1, i, j]
                if v > best:
                    best = v
                    arg = i
            dp[t, j] = best + node_scores[t, j]
            bp[t, j] = arg
    path = np.empty(T, dtype=np.int64)
    best = -np.inf
    arg = 0
    for j in range(counts[T - 1]):
        if dp[T - 1, j] > best:
            best = dp[T - 1, j]
            arg = j
    path[T - 1] = arg
    for t in range(T - 2, -1, -1):
        path[t] = bp[t + 1, path[t + 1]]
    return path


@njit(cache=True, nogil=True)
def _logsumexp_row(v, n):
    m = -np.inf
    for i in range(n):
        if v[i] > m:
            m = v[i]
    if not np.isfinite(m):
        return m
    s = 0.0
    for i in range(n):
        s += np.exp(v[i] - m)
    return m + np.log(s)


@njit(cache=True, nogil=True)
def forward_log_partition(node_scores, edge_scores, counts):
    T = len(counts)
    K = node_scores.shape[1]
    alpha = np.empty(K, dtype=np.float64)
    nxt = np.empty(K, dtype=np.float64)
    work = np.empty(K, dtype=np.float64)
    for j in range(counts[0]):
        alpha[j] = node_scores[0, j]
    for t in range(1, T):
        for j in range(counts[t]):
            for i in range(counts[t - 1]):
                work[i] = alpha[i] + edge_scores[t - 1, i, j]
            nxt[j] = _logsumexp_row(work, counts[t - 1]) + node_scores[t, j]
        for j in range(counts[t]):
            alpha[j] = nxt[j]
    return _logsumexp_row(alpha, counts[T - 1])


@njit(cache=True, nogil=True)
def crf_expectations(phi, d1, d2, node_scores, edge_scores, counts):
    T = len(counts)
    K = node_scores.shape[1]
    alpha = np.full((T, K), -np.inf, dtype=np.float64)
    beta = np.full((T, K), -np.inf, dtype=np.float64)
    work = np.empty(K, dtype=np.float64)
    for j in range(counts[0]):
        alpha[0, j] = node_scores[0, j]
    for t in range(1, T):
        for j in range(counts[t]):
            for i in range(counts[t - 1]):
                work[i] = alpha[t - 1, i] + edge_scores[t - 1, i, j]
            alpha[t, j] = _logsumexp_row(work, counts[t - 1]) + node_scores[t, j]
    log_z = _logsumexp_row(alpha[T - 1], counts[T - 1])

    for j in range(counts[T - 1]):
        beta[T - 1, j] = 0.0
    for t in range(T - 2, -1, -1):
        for i in range(counts[t]):
            for j in range(counts[t + 1]):
                work[j] = edge_scores[t, i, j] + node_scores[t + 1, j] + beta[t + 1, j]
            beta[t, i] = _logsumexp_row(work, counts[t + 1])

    e_phi = 0.0
    for t in range(T):
        for j in range(counts[t]):
            e_phi += np.exp(alpha[t, j] + beta[t, j] - log_z) * phi[t, j]

    e_d1 = 0.0
    e_d2 = 0.0
    for t in range(T - 1):
        for i in range(counts[t]):
            for j in range(counts[t + 1]):
                m = np.exp(
                    alpha[t, i]
                    + edge_scores[t, i, j]
                    + node_scores[t + 1, j]
                    + beta[t + 1, j]
                    - log_z
                )
                e_d1 += m * d1[t, i, j]
                e_d2 += m * d2[t, i, j]
    return log_z, e_phi, e_d1, e_d2
