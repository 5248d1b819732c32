"""Flat-array regression trees with numba kernels.

Trees are stored as parallel arrays indexed by node id: ``feature`` is -1 at
leaves, internal nodes route queries left on ``x[feature] <= threshold``.
Split search is exact greedy variance reduction with deterministic
tie-breaking (lowest feature index, then lowest threshold).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def fit_tree_arrays(x, y, max_depth, min_leaf):
    """Grow one tree; returns (feature, threshold, left, right, value, n_nodes)."""
    n = x.shape[0]
    n_features = x.shape[1]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)

    idx = np.arange(n)
    # explicit stack of (node, depth, lo, hi) ranges over idx
    stack_node = np.empty(max_nodes, np.int64)
    stack_depth = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_node[0] = 0
    stack_depth[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        depth = stack_depth[sp]
        lo = stack_lo[sp]
        hi = stack_hi[sp]
        m = hi - lo

        total = 0.0
        for i in range(lo, hi):
            total += y[idx[i]]
        mean = total / m
        value[node] = mean

        if depth >= max_depth or m < 2 * min_leaf:
            continue
        sse_parent = 0.0
        for i in range(lo, hi):
            d = y[idx[i]] - mean
            sse_parent += d * d
        # pure node up to rounding noise of summing m near-identical values
        tol = 1e-14 * (abs(mean) + 1.0)
        if sse_parent <= m * tol * tol:
            continue

        best_gain = 0.0
        best_feature = -1
        best_threshold = 0.0
        for f in range(n_features):
            xs = np.empty(m)
            for i in range(m):
                xs[i] = x[idx[lo + i], f]
            order = np.argsort(xs, kind="mergesort")
            ys_sorted = np.empty(m)
            xs_sorted = np.empty(m)
            for i in range(m):
                ys_sorted[i] = y[idx[lo + order[i]]]
                xs_sorted[i] = xs[order[i]]
            total_sq = 0.0
            for i in range(m):
                total_sq += ys_sorted[i] * ys_sorted[i]
            csum = 0.0
            csq = 0.0
            for i in range(m - 1):
                yi = ys_sorted[i]
                csum += yi
                csq += yi * yi
                k = i + 1
                if k < min_leaf or m - k < min_leaf:
                    continue
                if xs_sorted[i] == xs_sorted[i + 1]:
                    continue
                sse_left = csq - csum * csum / k
                rsum = total - csum
                sse_right = (total_sq - csq) - rsum * rsum / (m - k)
                gain = sse_parent - sse_left - sse_right
                if gain > best_gain:
                    best_gain = gain
                    best_feature = f
                    best_threshold = 0.5 * (xs_sorted[i] + xs_sorted[i + 1])

        if best_feature < 0:
            continue

        # stable partition of idx[lo:hi] around the split
        buf = np.empty(m, np.int64)
        nl = 0
        for i in range(lo, hi):
            if x[idx[i], best_feature] <= best_threshold:
                buf[nl] = idx[i]
                nl += 1
        nr = nl
        for i in range(lo, hi):
            if x[idx[i], best_feature] > best_threshold:
                buf[nr] = idx[i]
                nr += 1
        for i in range(m):
            idx[lo + i] = buf[i]

        feature[node] = best_feature
        threshold[node] = best_threshold
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        stack_node[sp] = lid
        stack_depth[sp] = depth + 1
        stack_lo[sp] = lo
        stack_hi[sp] = lo + nl
        sp += 1
        stack_node[sp] = rid
        stack_depth[sp] = depth + 1
        stack_lo[sp] = lo + nl
        stack_hi[sp] = hi
        sp += 1

    return (
        feature[:n_nodes],
        threshold[:n_nodes],
        left[:n_nodes],
        right[:n_nodes],
        value[:n_nodes],
        n_nodes,
    )


@njit(cache=True)
def predict_tree(feature, threshold, left, right, value, q, out):
    for i in range(q.shape[0]):
        node = 0
        while feature[node] >= 0:
            if q[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]


@njit(cache=True)
def predict_ensemble(features, thresholds, lefts, rights, values, q):
    """Per-tree predictions for padded tree arrays; returns (n_trees, n_points)."""
    n_trees = features.shape[0]
    n_points = q.shape[0]
    out = np.empty((n_trees, n_points))
    for b in range(n_trees):
        for i in range(n_points):
            node = 0
            while features[b, node] >= 0:
                if q[i, features[b, node]] <= thresholds[b, node]:
                    node = lefts[b, node]
                else:
                    node = rights[b, node]
            out[b, i] = values[b, node]
    return out
