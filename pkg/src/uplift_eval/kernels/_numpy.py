"""Pure-numpy twins of the compiled kernels in ``_numba``.

Sums that feed split scores and leaf values go through ``np.cumsum`` (strictly
sequential) rather than ``np.sum`` (pairwise), which keeps results identical
to the compiled loops.
"""

import numpy as np


def _seqsum(a):
    return np.cumsum(a)[-1] if a.size else 0.0


def build_tree(X, y, w, order, max_depth, min_leaf, feature, threshold, left, right, value):
    n, d = X.shape
    wy = w * y
    active = w > 0.0
    node_of = np.where(active, 0, -1)
    sums = {0: (_seqsum(wy[active]), _seqsum(w[active]))}
    sorted_active = [order[j][active[order[j]]] for j in range(d)]
    n_nodes = 1
    start, stop = 0, 1
    for _ in range(max_depth):
        for k in range(start, stop):
            s_k, w_k = sums[k]
            best, best_f, best_t = -np.inf, -1, 0.0
            for j in range(d):
                rows = sorted_active[j][node_of[sorted_active[j]] == k]
                if rows.size < 2:
                    continue
                xs = X[rows, j]
                sl = np.cumsum(wy[rows])[:-1]
                wl = np.cumsum(w[rows])[:-1]
                sr = s_k - sl
                with np.errstate(divide="ignore", invalid="ignore"):
                    sc = sl * sl / wl + sr * sr / (w_k - wl)
                ok = (xs[1:] > xs[:-1]) & (wl >= min_leaf) & (w_k - wl >= min_leaf)
                if not ok.any():
                    continue
                sc = np.where(ok, sc, -np.inf)
                t = int(np.argmax(sc))
                if sc[t] > best:
                    best, best_f, best_t = sc[t], j, (xs[t] + xs[t + 1]) / 2.0
            if best_f >= 0 and best > s_k * s_k / w_k:
                feature[k] = best_f
                threshold[k] = best_t
                left[k] = n_nodes
                right[k] = n_nodes + 1
                n_nodes += 2
            else:
                value[k] = s_k / w_k
        for k in range(start, stop):
            members = np.flatnonzero(node_of == k)
            f = feature[k]
            if f < 0:
                node_of[members] = -1
                continue
            go_left = X[members, f] <= threshold[k]
            for child, rows in ((left[k], members[go_left]), (right[k], members[~go_left])):
                node_of[rows] = child
                sums[child] = (_seqsum(wy[rows]), _seqsum(w[rows]))
        start, stop = stop, n_nodes
        if start == stop:
            break
    for k in range(start, stop):
        s_k, w_k = sums[k]
        value[k] = s_k / w_k
    return n_nodes


def predict_forest(X, feature, threshold, left, right, value):
    n = X.shape[0]
    rows = np.arange(n)
    out = np.zeros(n)
    for t in range(feature.shape[0]):
        node = np.zeros(n, dtype=np.int64)
        while True:
            f = feature[t, node]
            internal = f >= 0
            if not internal.any():
                break
            go_left = X[rows, np.maximum(f, 0)] <= threshold[t, node]
            node = np.where(internal, np.where(go_left, left[t, node], right[t, node]), node)
        out += value[t, node]
    return out / feature.shape[0]


def knn_predict(X_train, y_train, X_query, k, chunk=256):
    out = np.empty(X_query.shape[0])
    for lo in range(0, X_query.shape[0], chunk):
        q = X_query[lo:lo + chunk]
        diff = q[:, None, :] - X_train[None, :, :]
        dist = np.cumsum(diff * diff, axis=2)[:, :, -1]
        idx = np.argsort(dist, axis=1, kind="stable")[:, :k]
        out[lo:lo + chunk] = np.cumsum(y_train[idx], axis=1)[:, -1] / k
    return out


def segment_stats(y_ranked, w_ranked, cuts):
    out = np.empty((cuts.shape[0], 6))
    treated = w_ranked == 1
    for c, m in enumerate(cuts):
        for col, arm in ((0, treated[:m]), (3, ~treated[:m])):
            ys = y_ranked[:m][arm]
            n_arm = ys.size
            mean = _seqsum(ys) / n_arm if n_arm else np.nan
            r = ys - mean
            out[c, col] = n_arm
            out[c, col + 1] = mean
            out[c, col + 2] = _seqsum(r * r) / (n_arm - 1) if n_arm > 1 else np.nan
    return out
