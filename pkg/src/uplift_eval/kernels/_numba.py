"""Numba-compiled inner loops.

Every function here has a twin with the same signature in ``_numpy``. The two
paths walk the data in the same order and accumulate sums sequentially, so
tree fits and forest predictions agree bit for bit.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def build_tree(X, y, w, order, max_depth, min_leaf, feature, threshold, left, right, value):
    """Grow one regression tree level by level into preallocated node arrays.

    ``order`` holds the stable argsort of every column of ``X``; rows with
    zero weight are skipped. Returns the number of nodes used.
    """
    n, d = X.shape
    cap = feature.shape[0]
    node_of = np.full(n, -1, dtype=np.int64)
    node_s = np.zeros(cap)
    node_w = np.zeros(cap)
    n_act = 0
    for i in range(n):
        if w[i] > 0.0:
            node_of[i] = 0
            node_s[0] += w[i] * y[i]
            node_w[0] += w[i]
            n_act += 1
    # sorted orders restricted to rows that carry weight
    ordc = np.empty((d, n_act), dtype=np.int64)
    xsrt = np.empty((d, n_act))
    wsrt = np.empty((d, n_act))
    wysrt = np.empty((d, n_act))
    for j in range(d):
        c = 0
        for t in range(n):
            i = order[j, t]
            if w[i] > 0.0:
                ordc[j, c] = i
                xsrt[j, c] = X[i, j]
                wsrt[j, c] = w[i]
                wysrt[j, c] = w[i] * y[i]
                c += 1
    n_nodes = 1
    start = 0
    stop = 1
    for depth in range(max_depth):
        m = stop - start
        best = np.full(m, -np.inf)
        best_f = np.full(m, -1, dtype=np.int64)
        best_t = np.zeros(m)
        sl = np.zeros(m)
        wl = np.zeros(m)
        prev = np.zeros(m)
        seen = np.zeros(m, dtype=np.bool_)
        splittable = np.zeros(m, dtype=np.bool_)
        for kk in range(m):
            splittable[kk] = node_w[start + kk] >= 2.0 * min_leaf
        for j in range(d):
            sl[:] = 0.0
            wl[:] = 0.0
            seen[:] = False
            for t in range(n_act):
                i = ordc[j, t]
                k = node_of[i]
                if k < start:
                    continue
                kk = k - start
                if not splittable[kk]:
                    continue
                x = xsrt[j, t]
                if seen[kk] and x > prev[kk] and wl[kk] >= min_leaf and node_w[k] - wl[kk] >= min_leaf:
                    sr = node_s[k] - sl[kk]
                    sc = sl[kk] * sl[kk] / wl[kk] + sr * sr / (node_w[k] - wl[kk])
                    if sc > best[kk]:
                        best[kk] = sc
                        best_f[kk] = j
                        best_t[kk] = (prev[kk] + x) / 2.0
                sl[kk] += wysrt[j, t]
                wl[kk] += wsrt[j, t]
                prev[kk] = x
                seen[kk] = True
        for kk in range(m):
            k = start + kk
            parent = node_s[k] * node_s[k] / node_w[k]
            if best_f[kk] >= 0 and best[kk] > parent:
                feature[k] = best_f[kk]
                threshold[k] = best_t[kk]
                left[k] = n_nodes
                right[k] = n_nodes + 1
                n_nodes += 2
            else:
                value[k] = node_s[k] / node_w[k]
        for i in range(n):
            k = node_of[i]
            if k < start:
                continue
            f = feature[k]
            if f < 0:
                node_of[i] = -1
                continue
            c = left[k] if X[i, f] <= threshold[k] else right[k]
            node_of[i] = c
            node_s[c] += w[i] * y[i]
            node_w[c] += w[i]
        start = stop
        stop = n_nodes
        if start == stop:
            break
    for k in range(start, stop):
        value[k] = node_s[k] / node_w[k]
    return n_nodes


@njit(cache=True, nogil=True)
def predict_forest(X, feature, threshold, left, right, value):
    n = X.shape[0]
    n_trees = feature.shape[0]
    out = np.zeros(n)
    for i in range(n):
        acc = 0.0
        for t in range(n_trees):
            k = 0
            while feature[t, k] >= 0:
                if X[i, feature[t, k]] <= threshold[t, k]:
                    k = left[t, k]
                else:
                    k = right[t, k]
            acc += value[t, k]
        out[i] = acc / n_trees
    return out


@njit(cache=True, nogil=True)
def knn_predict(X_train, y_train, X_query, k):
    """Mean target of the ``k`` nearest training rows; distance ties go to the lower row index."""
    n, d = X_train.shape
    out = np.zeros(X_query.shape[0])
    dist = np.empty(n)
    for q in range(X_query.shape[0]):
        for i in range(n):
            acc = 0.0
            for j in range(d):
                diff = X_train[i, j] - X_query[q, j]
                acc += diff * diff
            dist[i] = acc
        idx = np.argsort(dist, kind="mergesort")
        acc = 0.0
        for r in range(k):
            acc += y_train[idx[r]]
        out[q] = acc / k
    return out


@njit(cache=True, nogil=True)
def segment_stats(y_ranked, w_ranked, cuts):
    """Per-arm count, mean and sample variance of the top ``cuts[c]`` ranked rows.

    Returns an array of shape (len(cuts), 6): n1, mean1, var1, n0, mean0, var0.
    Variances use the n-1 denominator and are NaN for arms with fewer than two rows.
    """
    out = np.empty((cuts.shape[0], 6))
    for c in range(cuts.shape[0]):
        m = cuts[c]
        n1 = 0
        n0 = 0
        s1 = 0.0
        s0 = 0.0
        for i in range(m):
            if w_ranked[i] == 1:
                n1 += 1
                s1 += y_ranked[i]
            else:
                n0 += 1
                s0 += y_ranked[i]
        mean1 = s1 / n1 if n1 > 0 else np.nan
        mean0 = s0 / n0 if n0 > 0 else np.nan
        q1 = 0.0
        q0 = 0.0
        for i in range(m):
            if w_ranked[i] == 1:
                r = y_ranked[i] - mean1
                q1 += r * r
            else:
                r = y_ranked[i] - mean0
                q0 += r * r
        out[c, 0] = n1
        out[c, 1] = mean1
        out[c, 2] = q1 / (n1 - 1) if n1 > 1 else np.nan
        out[c, 3] = n0
        out[c, 4] = mean0
        out[c, 5] = q0 / (n0 - 1) if n0 > 1 else np.nan
    return out
