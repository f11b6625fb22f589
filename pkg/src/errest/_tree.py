"""Numba kernels for CART-style tree growing and forest prediction.

Trees live in flat arrays (feature, threshold, left, right, leaf payload);
internal nodes have feature >= 0, leaves have feature == -1. Growing uses an
explicit stack over an in-place partitioned index buffer. All randomness is
drawn from numba's np.random stream seeded at the top of each call, so a tree
is fully determined by (data, index buffer, params, seed).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def grow_reg(X, y, idx, mtry, min_node_size, seed):
    np.random.seed(seed)
    n = idx.shape[0]
    p = X.shape[1]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    value = np.zeros(max_nodes)

    work = idx.copy()
    buf = np.empty(n, np.int64)
    xv = np.empty(n)
    yv = np.empty(n)
    feat_pool = np.empty(p, np.int64)

    stack_node = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo

        s = 0.0
        for i in range(lo, hi):
            s += y[work[i]]
        mean = s / m
        value[node] = mean
        if m <= min_node_size:
            continue
        sse = 0.0
        for i in range(lo, hi):
            d = y[work[i]] - mean
            sse += d * d
        if sse <= 1e-24 * m:
            continue

        for j in range(p):
            feat_pool[j] = j
        best_feat = -1
        best_thr = 0.0
        best_score = -np.inf
        for t in range(mtry):
            r = t + np.random.randint(0, p - t)
            tmp = feat_pool[t]
            feat_pool[t] = feat_pool[r]
            feat_pool[r] = tmp
            f = feat_pool[t]
            for i in range(m):
                xv[i] = X[work[lo + i], f]
            order = np.argsort(xv[:m])
            for i in range(m):
                yv[i] = y[work[lo + order[i]]]
            sl = 0.0
            for i in range(m - 1):
                sl += yv[i]
                if xv[order[i + 1]] > xv[order[i]]:
                    ml = i + 1.0
                    mr = m - ml
                    sr = s - sl
                    score = sl * sl / ml + sr * sr / mr
                    if score > best_score:
                        best_score = score
                        best_feat = f
                        best_thr = 0.5 * (xv[order[i]] + xv[order[i + 1]])
        if best_feat < 0:
            continue

        nl = 0
        nr = 0
        for i in range(lo, hi):
            if X[work[i], best_feat] <= best_thr:
                buf[lo + nl] = work[i]
                nl += 1
        for i in range(lo, hi):
            if X[work[i], best_feat] > best_thr:
                buf[lo + nl + nr] = work[i]
                nr += 1
        for i in range(lo, hi):
            work[i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_node[top + 1] = n_nodes + 1
        stack_lo[top + 1] = lo + nl
        stack_hi[top + 1] = hi
        top += 2
        n_nodes += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], value[:n_nodes]


@njit(cache=True)
def grow_clf(X, y, n_classes, idx, mtry, min_node_size, seed):
    np.random.seed(seed)
    n = idx.shape[0]
    p = X.shape[1]
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, np.int64)
    threshold = np.zeros(max_nodes)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    probs = np.zeros((max_nodes, n_classes))

    work = idx.copy()
    buf = np.empty(n, np.int64)
    xv = np.empty(n)
    cls = np.empty(n, np.int64)
    cnt = np.empty(n_classes, np.int64)
    cnt_l = np.empty(n_classes, np.int64)
    cnt_r = np.empty(n_classes, np.int64)
    feat_pool = np.empty(p, np.int64)

    stack_node = np.empty(max_nodes, np.int64)
    stack_lo = np.empty(max_nodes, np.int64)
    stack_hi = np.empty(max_nodes, np.int64)
    stack_node[0] = 0
    stack_lo[0] = 0
    stack_hi[0] = n
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack_node[top]
        lo = stack_lo[top]
        hi = stack_hi[top]
        m = hi - lo

        for c in range(n_classes):
            cnt[c] = 0
        for i in range(lo, hi):
            cnt[y[work[i]]] += 1
        maxc = 0
        for c in range(n_classes):
            probs[node, c] = cnt[c] / m
            if cnt[c] > maxc:
                maxc = cnt[c]
        if m <= min_node_size or maxc == m:
            continue

        for j in range(p):
            feat_pool[j] = j
        best_feat = -1
        best_thr = 0.0
        best_score = -np.inf
        for t in range(mtry):
            r = t + np.random.randint(0, p - t)
            tmp = feat_pool[t]
            feat_pool[t] = feat_pool[r]
            feat_pool[r] = tmp
            f = feat_pool[t]
            for i in range(m):
                xv[i] = X[work[lo + i], f]
            order = np.argsort(xv[:m])
            for i in range(m):
                cls[i] = y[work[lo + order[i]]]
            for c in range(n_classes):
                cnt_l[c] = 0
                cnt_r[c] = cnt[c]
            ssq_l = 0.0
            ssq_r = 0.0
            for c in range(n_classes):
                ssq_r += cnt[c] * cnt[c]
            for i in range(m - 1):
                c = cls[i]
                ssq_l += 2.0 * cnt_l[c] + 1.0
                ssq_r -= 2.0 * cnt_r[c] - 1.0
                cnt_l[c] += 1
                cnt_r[c] -= 1
                if xv[order[i + 1]] > xv[order[i]]:
                    ml = i + 1.0
                    mr = m - ml
                    score = ssq_l / ml + ssq_r / mr
                    if score > best_score:
                        best_score = score
                        best_feat = f
                        best_thr = 0.5 * (xv[order[i]] + xv[order[i + 1]])
        if best_feat < 0:
            continue

        nl = 0
        nr = 0
        for i in range(lo, hi):
            if X[work[i], best_feat] <= best_thr:
                buf[lo + nl] = work[i]
                nl += 1
        for i in range(lo, hi):
            if X[work[i], best_feat] > best_thr:
                buf[lo + nl + nr] = work[i]
                nr += 1
        for i in range(lo, hi):
            work[i] = buf[i]

        feature[node] = best_feat
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_lo[top] = lo
        stack_hi[top] = lo + nl
        stack_node[top + 1] = n_nodes + 1
        stack_lo[top + 1] = lo + nl
        stack_hi[top + 1] = hi
        top += 2
        n_nodes += 2

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], probs[:n_nodes]


@njit(cache=True)
def predict_reg(X, feature, threshold, left, right, value, roots):
    n = X.shape[0]
    T = roots.shape[0]
    out = np.zeros(n)
    for t in range(T):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] += value[node]
    return out / T


@njit(cache=True)
def predict_clf(X, feature, threshold, left, right, probs, roots, n_classes):
    n = X.shape[0]
    T = roots.shape[0]
    out = np.zeros((n, n_classes))
    for t in range(T):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            for c in range(n_classes):
                out[i, c] += probs[node, c]
    return out / T
