"""Pure-numpy reference implementations of the hot kernels.

Functionally identical to the compiled ``_native`` module; used as the
fallback backend when the extension is unavailable and as the comparison
baseline in the benchmark suite.
"""

import numpy as np


def median_subtract(mags, radius, clamp):
    n = mags.shape[0]
    out = np.empty_like(mags)
    for t in range(n):
        lo = max(0, t - radius)
        hi = min(n, t + radius + 1)
        out[t] = mags[t] - np.median(mags[lo:hi], axis=0)
    if clamp:
        np.maximum(out, 0.0, out=out)
    return out


def viterbi(log_init, log_trans, log_lik):
    T, S = log_lik.shape
    backptr = np.zeros((T, S), dtype=np.int32)
    prev = log_init + log_lik[0]
    if not np.any(prev > -np.inf):
        raise ValueError("model cannot explain observation at frame 0")
    for t in range(1, T):
        scores = prev[:, None] + log_trans
        backptr[t] = np.argmax(scores, axis=0)
        prev = scores[backptr[t], np.arange(S)] + log_lik[t]
        if not np.any(prev > -np.inf):
            raise ValueError(f"model cannot explain observation at frame {t}")
    path = np.empty(T, dtype=np.int64)
    path[-1] = int(np.argmax(prev))
    for t in range(T - 2, -1, -1):
        path[t] = backptr[t + 1, path[t + 1]]
    return path, float(np.max(prev))


def forest_predict(X, feature, threshold, left, right, value, tree_offsets):
    n = X.shape[0]
    n_trees = len(tree_offsets) - 1
    total = np.zeros(n, dtype=np.float64)
    sample_idx = np.arange(n)
    for tr in range(n_trees):
        node = np.full(n, tree_offsets[tr], dtype=np.int64)
        active = left[node] >= 0
        while np.any(active):
            cur = node[active]
            go_left = X[sample_idx[active], feature[cur]] < threshold[cur]
            node[active] = np.where(go_left, left[cur], right[cur])
            active = left[node] >= 0
        total += value[node]
    return total / n_trees
