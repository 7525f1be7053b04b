"""Compiled kernels for the bootstrap regression forest.

The surrogate fits dozens of tiny forests per optimization run, so the CART
builder and the traversal are jitted. Trees are stored as flat arrays: node
0 is the root, feat < 0 marks a leaf, and children index into the same row.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def build_forest(X, y, boot, max_depth):
    """Grow one tree per bootstrap row using exact SSE splits.

    X is (n, d), y is (n,), boot is (T, n) of sample indices. Returns flat
    node arrays (feat, thr, left, right, val), each (T, max_nodes).
    """
    T, n = boot.shape
    d = X.shape[1]
    max_nodes = 4 * n + 8
    feat = np.full((T, max_nodes), -1, dtype=np.int64)
    thr = np.zeros((T, max_nodes), dtype=np.float64)
    left = np.full((T, max_nodes), -1, dtype=np.int64)
    right = np.full((T, max_nodes), -1, dtype=np.int64)
    val = np.zeros((T, max_nodes), dtype=np.float64)

    idx_buf = np.empty(n, dtype=np.int64)
    stack = np.empty((2 * n + max_depth + 2, 4), dtype=np.int64)

    for t in range(T):
        for i in range(n):
            idx_buf[i] = boot[t, i]
        top = 0
        stack[0, 0] = 0
        stack[0, 1] = 0
        stack[0, 2] = n
        stack[0, 3] = 0
        n_nodes = 1
        while top >= 0:
            node = stack[top, 0]
            s = stack[top, 1]
            ln = stack[top, 2]
            depth = stack[top, 3]
            top -= 1
            m = 0.0
            for i in range(s, s + ln):
                m += y[idx_buf[i]]
            m /= ln
            val[t, node] = m
            if depth >= max_depth or ln < 2:
                continue
            const = True
            y0 = y[idx_buf[s]]
            for i in range(s + 1, s + ln):
                if y[idx_buf[i]] != y0:
                    const = False
                    break
            if const:
                continue
            best_sse = np.inf
            best_f = -1
            best_thr = 0.0
            order = np.empty(ln, dtype=np.int64)
            tmp = np.empty(ln, dtype=np.int64)
            for j in range(d):
                for i in range(ln):
                    order[i] = idx_buf[s + i]
                # insertion sort: segments are tiny at this trial count
                for i in range(1, ln):
                    key = order[i]
                    kx = X[key, j]
                    k2 = i - 1
                    while k2 >= 0 and X[order[k2], j] > kx:
                        order[k2 + 1] = order[k2]
                        k2 -= 1
                    order[k2 + 1] = key
                tot = 0.0
                totsq = 0.0
                for i in range(ln):
                    yy = y[order[i]]
                    tot += yy
                    totsq += yy * yy
                cs = 0.0
                cq = 0.0
                for i in range(ln - 1):
                    yy = y[order[i]]
                    cs += yy
                    cq += yy * yy
                    # equal feature values cannot separate; skip the cut
                    if X[order[i], j] >= X[order[i + 1], j]:
                        continue
                    k = i + 1.0
                    sse = (cq - cs * cs / k) + (
                        (totsq - cq) - (tot - cs) * (tot - cs) / (ln - k)
                    )
                    if sse < best_sse:
                        best_sse = sse
                        best_f = j
                        best_thr = 0.5 * (X[order[i], j] + X[order[i + 1], j])
            if best_f < 0:
                continue
            nl = 0
            for i in range(s, s + ln):
                if X[idx_buf[i], best_f] <= best_thr:
                    tmp[nl] = idx_buf[i]
                    nl += 1
            nr = nl
            for i in range(s, s + ln):
                if X[idx_buf[i], best_f] > best_thr:
                    tmp[nr] = idx_buf[i]
                    nr += 1
            for i in range(ln):
                idx_buf[s + i] = tmp[i]
            lnode = n_nodes
            rnode = n_nodes + 1
            n_nodes += 2
            feat[t, node] = best_f
            thr[t, node] = best_thr
            left[t, node] = lnode
            right[t, node] = rnode
            top += 1
            stack[top, 0] = lnode
            stack[top, 1] = s
            stack[top, 2] = nl
            stack[top, 3] = depth + 1
            top += 1
            stack[top, 0] = rnode
            stack[top, 1] = s + nl
            stack[top, 2] = ln - nl
            stack[top, 3] = depth + 1
    return feat, thr, left, right, val


@njit(cache=True)
def forest_moments(feat, thr, left, right, val, P):
    """Mean and across-tree variance of the forest at each row of P."""
    T = feat.shape[0]
    n = P.shape[0]
    mean = np.zeros(n)
    m2 = np.zeros(n)
    for t in range(T):
        for p in range(n):
            node = 0
            while feat[t, node] >= 0:
                if P[p, feat[t, node]] <= thr[t, node]:
                    node = left[t, node]
                else:
                    node = right[t, node]
            v = val[t, node]
            mean[p] += v
            m2[p] += v * v
    mean /= T
    var = m2 / T - mean * mean
    return mean, var
