"""Hot numeric kernels: decision-tree split scan and tree traversal.

Each kernel exists twice: a loop form compiled with ``numba.njit`` and a
vectorised numpy fallback.  The active implementation is chosen at import
time by :mod:`ecofair.accel`; ``benchmarks/bench_kernels.py`` times both.

Both forms accumulate prefix sums left to right, so the chosen split is the
same under either backend for non-pathological inputs.
"""

import numpy as np

from .accel import HAS_NUMBA


def _best_split_loop(values, labels, min_leaf):
    """Best Gini split of a node, given rows sorted by one feature.

    Returns ``(decrease, threshold)`` where ``decrease`` is the impurity
    decrease of the best boundary (midpoint between distinct consecutive
    values) honouring ``min_leaf`` on both sides, or ``(-1.0, 0.0)`` when no
    boundary qualifies.  Ties keep the lowest threshold.
    """
    n = values.shape[0]
    total_pos = 0.0
    for i in range(n):
        total_pos += labels[i]
    nf = float(n)
    parent = 2.0 * (total_pos / nf) * (1.0 - total_pos / nf)

    best_dec = -1.0
    best_thr = 0.0
    left_pos = 0.0
    for i in range(n - 1):
        left_pos += labels[i]
        if values[i] == values[i + 1]:
            continue
        n_left = i + 1
        n_right = n - n_left
        if n_left < min_leaf or n_right < min_leaf:
            continue
        pl = left_pos / n_left
        pr = (total_pos - left_pos) / n_right
        child = (n_left * 2.0 * pl * (1.0 - pl) + n_right * 2.0 * pr * (1.0 - pr)) / nf
        dec = parent - child
        if dec > best_dec:
            best_dec = dec
            best_thr = 0.5 * (values[i] + values[i + 1])
    return best_dec, best_thr


def _best_split_vec(values, labels, min_leaf):
    n = values.shape[0]
    if n < 2:
        return -1.0, 0.0
    total_pos = float(np.cumsum(labels)[-1])
    nf = float(n)
    parent = 2.0 * (total_pos / nf) * (1.0 - total_pos / nf)

    left_pos = np.cumsum(labels)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)
    n_right = nf - n_left
    boundary = values[:-1] != values[1:]
    ok = boundary & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not ok.any():
        return -1.0, 0.0
    pl = left_pos / n_left
    pr = (total_pos - left_pos) / n_right
    child = (n_left * 2.0 * pl * (1.0 - pl) + n_right * 2.0 * pr * (1.0 - pr)) / nf
    dec = np.where(ok, parent - child, -np.inf)
    i = int(np.argmax(dec))
    return float(dec[i]), float(0.5 * (values[i] + values[i + 1]))


def _tree_predict_loop(feature, threshold, left, right, value, X):
    """Per-row descent through a flattened tree; returns leaf values."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out


def _tree_predict_vec(feature, threshold, left, right, value, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        nd = node[idx]
        go_left = X[idx, feature[nd]] <= threshold[nd]
        node[idx] = np.where(go_left, left[nd], right[nd])
        active[idx] = feature[node[idx]] >= 0
    return value[node]


if HAS_NUMBA:
    from numba import njit

    best_split = njit(cache=True)(_best_split_loop)
    tree_predict = njit(cache=True)(_tree_predict_loop)
else:
    best_split = _best_split_vec
    tree_predict = _tree_predict_vec
