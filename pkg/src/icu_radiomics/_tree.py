"""Compiled CART builder for binary classification with Gini splits.

All randomness comes from a splitmix64 stream seeded per tree, so a tree is a
pure function of (data, parameters, tree seed).
"""

from __future__ import annotations

import numba
import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


@numba.njit(cache=True, nogil=True)
def _next(state):
    state[0] = state[0] + _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=True, nogil=True)
def _randint(state, bound):
    # uniform integer in [0, bound) from the top 53 bits
    u = (_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)
    r = int(u * bound)
    return r if r < bound else bound - 1


@numba.njit(cache=True, nogil=True)
def bootstrap_indices(n, seed):
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _randint(state, n)
    return out, state[0]


@numba.njit(cache=True, nogil=True)
def build_tree(xt, y, w, sample, mtry, max_depth, min_leaf, seed):
    """Grow one tree on rows ``sample`` of ``xt`` (features x samples).

    Returns node arrays (feature, threshold, left, right, value, weight,
    impurity); ``feature == -1`` marks a leaf, ``value`` is the weighted
    class-1 fraction, ``weight`` the weighted sample count.
    """
    d = xt.shape[0]
    n = sample.shape[0]
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros(cap)
    weight = np.zeros(cap)
    impurity = np.zeros(cap)

    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    idx = sample.copy()
    feats = np.arange(d)
    vals = np.empty(n)
    labs = np.empty(n, dtype=np.int8)
    wts = np.empty(n)

    # stack entries: node id, start, end, depth
    stack = np.empty((cap, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        w0 = 0.0
        w1 = 0.0
        for k in range(start, end):
            s = idx[k]
            if y[s] == 1:
                w1 += w[s]
            else:
                w0 += w[s]
        wn = w0 + w1
        weight[node] = wn
        value[node] = w1 / wn if wn > 0 else 0.0
        g_node = 1.0 - (w0 * w0 + w1 * w1) / (wn * wn) if wn > 0 else 0.0
        impurity[node] = g_node

        if w0 == 0.0 or w1 == 0.0 or depth == max_depth or m < 2 * min_leaf:
            continue

        best_score = -1.0
        best_f = -1
        best_t = 0.0
        tol = 1e-12 * wn
        evaluated = 0
        for k in range(d):
            feats[k] = k
        drawn = 0
        while drawn < d and evaluated < mtry:
            j = drawn + _randint(state, d - drawn)
            f = feats[j]
            feats[j] = feats[drawn]
            feats[drawn] = f
            drawn += 1

            for k in range(m):
                s = idx[start + k]
                vals[k] = xt[f, s]
            order = np.argsort(vals[:m], kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue  # constant in this node: does not count towards mtry
            evaluated += 1
            for k in range(m):
                s = idx[start + order[k]]
                labs[k] = y[s]
                wts[k] = w[s]
            l0 = 0.0
            l1 = 0.0
            for k in range(m - 1):
                if labs[k] == 1:
                    l1 += wts[k]
                else:
                    l0 += wts[k]
                if k + 1 < min_leaf or m - k - 1 < min_leaf:
                    continue
                v_lo = vals[order[k]]
                v_hi = vals[order[k + 1]]
                if v_lo == v_hi:
                    continue
                nl = l0 + l1
                r0 = w0 - l0
                r1 = w1 - l1
                nr = r0 + r1
                if nl <= 0.0 or nr <= 0.0:
                    continue
                score = (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr
                t = 0.5 * (v_lo + v_hi)
                if t >= v_hi:
                    t = v_lo
                if score > best_score + tol:
                    best_score = score
                    best_f = f
                    best_t = t
                elif score >= best_score - tol:
                    if f < best_f or (f == best_f and t < best_t):
                        best_score = score
                        best_f = f
                        best_t = t

        if best_f < 0:
            continue

        # partition idx[start:end] on x <= threshold
        lo = start
        hi = end - 1
        while lo <= hi:
            if xt[best_f, idx[lo]] <= best_t:
                lo += 1
            else:
                tmp = idx[lo]
                idx[lo] = idx[hi]
                idx[hi] = tmp
                hi -= 1
        feature[node] = best_f
        threshold[node] = best_t
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        left[node] = lid
        right[node] = rid
        # push right first so the left subtree is grown first
        stack[top, 0] = rid
        stack[top, 1] = lo
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lid
        stack[top, 1] = start
        stack[top, 2] = lo
        stack[top, 3] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        weight[:n_nodes].copy(),
        impurity[:n_nodes].copy(),
    )


@numba.njit(cache=True, nogil=True)
def predict_tree(x, feature, threshold, left, right, value):
    n = x.shape[0]
    out = np.empty(n)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if x[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = value[node]
    return out
