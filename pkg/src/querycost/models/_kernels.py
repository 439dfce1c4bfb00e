"""Numba kernels for growing trees on sparse, non-negative feature matrices.

Absent entries are value 0 and always go left (thresholds are positive
midpoints between observed values), so split search only ever scans the
stored non-zeros of a column.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _row_value(indptr, indices, data, r, f):
    lo = indptr[r]
    hi = indptr[r + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        c = indices[mid]
        if c == f:
            return data[mid]
        if c < f:
            lo = mid + 1
        else:
            hi = mid
    return 0.0


@njit(cache=True)
def _gini_score(stats, c):
    s = 0.0
    for k in range(stats.shape[0]):
        s += stats[k] * stats[k]
    return s / c


@njit(cache=True)
def grow_gini_tree(indptr, indices, data, n_features, y, w, n_classes, max_depth, min_leaf, max_features, seed):
    """Grow one classification tree depth-first with the Gini criterion.

    ``w`` holds per-row bootstrap multiplicities; rows with ``w == 0`` are
    out of bag. At each node ``max_features`` of the features that occur in
    the node are sampled. Returns flat node arrays plus per-node weighted
    class counts.
    """
    np.random.seed(seed)
    n = y.shape[0]
    order = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        if w[i] > 0:
            order[m] = i
            m += 1
    cap = 2 * m + 1
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    counts = np.zeros((cap, n_classes))

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    nnz = data.shape[0]
    ev = np.empty(nnz)
    er = np.empty(nnz, np.int64)
    fcount = np.zeros(n_features, np.int64)
    fpos = np.zeros(n_features, np.int64)
    present = np.empty(n_features, np.int64)
    tot = np.zeros(n_classes)
    racc = np.zeros(n_classes)
    lacc = np.zeros(n_classes)

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]

        tot[:] = 0.0
        tc = 0.0
        for i in range(start, end):
            r = order[i]
            tot[y[r]] += w[r]
            tc += w[r]
        counts[node, :] = tot
        if depth >= max_depth or tc < 2 * min_leaf:
            continue
        nonzero_classes = 0
        for k in range(n_classes):
            if tot[k] > 0:
                nonzero_classes += 1
        if nonzero_classes <= 1:
            continue

        # bucket the node's entries by feature
        n_present = 0
        for i in range(start, end):
            r = order[i]
            for p in range(indptr[r], indptr[r + 1]):
                f = indices[p]
                if fcount[f] == 0:
                    present[n_present] = f
                    n_present += 1
                fcount[f] += 1
        off = 0
        for j in range(n_present):
            f = present[j]
            fpos[f] = off
            off += fcount[f]
            fcount[f] = 0
        for i in range(start, end):
            r = order[i]
            for p in range(indptr[r], indptr[r + 1]):
                f = indices[p]
                q = fpos[f] + fcount[f]
                ev[q] = data[p]
                er[q] = r
                fcount[f] += 1

        n_try = min(max_features, n_present)
        for j in range(n_try):
            s = j + np.random.randint(n_present - j)
            tmp = present[j]
            present[j] = present[s]
            present[s] = tmp

        parent = _gini_score(tot, tc)
        best_gain = 1e-12 * tc
        best_f = -1
        best_thr = 0.0
        for j in range(n_try):
            f = present[j]
            a = fpos[f]
            b = a + fcount[f]
            idx = np.argsort(-ev[a:b], kind="mergesort")
            racc[:] = 0.0
            rc = 0.0
            last = 0.0
            for t in range(b - a):
                q = a + idx[t]
                v = ev[q]
                r = er[q]
                if t > 0 and v < last:
                    lc = tc - rc
                    if lc >= min_leaf and rc >= min_leaf:
                        for k in range(n_classes):
                            lacc[k] = tot[k] - racc[k]
                        gain = _gini_score(lacc, lc) + _gini_score(racc, rc) - parent
                        if gain > best_gain:
                            best_gain = gain
                            best_f = f
                            best_thr = 0.5 * (v + last)
                racc[y[r]] += w[r]
                rc += w[r]
                last = v
            lc = tc - rc
            if lc >= min_leaf and rc >= min_leaf:
                for k in range(n_classes):
                    lacc[k] = tot[k] - racc[k]
                gain = _gini_score(lacc, lc) + _gini_score(racc, rc) - parent
                if gain > best_gain:
                    best_gain = gain
                    best_f = f
                    best_thr = 0.5 * last
        for j in range(n_present):
            fcount[present[j]] = 0

        if best_f < 0:
            continue
        # partition order[start:end] so rows with x > thr come last
        i = start
        k2 = end - 1
        while i <= k2:
            if _row_value(indptr, indices, data, order[i], best_f) > best_thr:
                tmp = order[i]
                order[i] = order[k2]
                order[k2] = tmp
                k2 -= 1
            else:
                i += 1
        mid = i
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = lnode
        right[node] = rnode
        st_node[top] = rnode
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        top += 1

    return feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes], counts[:n_nodes]


@njit(cache=True)
def presort_columns(col_ptr, col_rows, col_vals):
    """Sort each CSC column by value, descending (stable)."""
    rows = col_rows.copy()
    vals = col_vals.copy()
    for f in range(col_ptr.shape[0] - 1):
        a = col_ptr[f]
        b = col_ptr[f + 1]
        if b - a > 1:
            idx = np.argsort(-col_vals[a:b], kind="mergesort")
            for t in range(b - a):
                rows[a + t] = col_rows[a + idx[t]]
                vals[a + t] = col_vals[a + idx[t]]
    return rows, vals


@njit(cache=True)
def _xgb_gain(gl, hl, gr, hr, g, h, lam, gamma):
    return 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - g * g / (h + lam)) - gamma


@njit(cache=True)
def grow_xgb_tree(col_ptr, col_rows, col_vals, g, h, max_depth, min_child_weight, lam, gamma):
    """Grow one second-order regression tree level by level.

    Columns must be presorted descending (see :func:`presort_columns`).
    Returns node arrays, per-node gradient/hessian sums and the leaf each
    training row ends in.
    """
    n = g.shape[0]
    n_features = col_ptr.shape[0] - 1
    cap = 2 * n + 1
    if max_depth < 30:
        cap = min(cap, 2 ** (max_depth + 1) - 1)
    feature = np.full(cap, -1, np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, np.int64)
    right = np.full(cap, -1, np.int64)
    parent = np.full(cap, -1, np.int64)
    G = np.zeros(cap)
    H = np.zeros(cap)
    C = np.zeros(cap)
    node_of = np.zeros(n, np.int64)
    for i in range(n):
        G[0] += g[i]
        H[0] += h[i]
    C[0] = n
    n_nodes = 1

    level = np.zeros(1, np.int64)
    loc = np.full(cap, -1, np.int64)
    for depth in range(max_depth):
        L = level.shape[0]
        if L == 0:
            break
        for j in range(L):
            loc[level[j]] = j
        best_gain = np.zeros(L)
        best_f = np.full(L, -1, np.int64)
        best_thr = np.zeros(L)
        best_gl = np.zeros(L)
        best_hl = np.zeros(L)
        best_cl = np.zeros(L)
        accg = np.zeros(L)
        acch = np.zeros(L)
        accc = np.zeros(L)
        last = np.zeros(L)
        touched = np.empty(L, np.int64)
        for f in range(n_features):
            nt = 0
            for e in range(col_ptr[f], col_ptr[f + 1]):
                r = col_rows[e]
                nd = node_of[r]
                j = loc[nd]
                if j < 0:
                    continue
                v = col_vals[e]
                if accc[j] == 0:
                    touched[nt] = j
                    nt += 1
                elif v < last[j]:
                    gr = accg[j]
                    hr = acch[j]
                    gl = G[nd] - gr
                    hl = H[nd] - hr
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gain = _xgb_gain(gl, hl, gr, hr, G[nd], H[nd], lam, gamma)
                        if gain > best_gain[j]:
                            best_gain[j] = gain
                            best_f[j] = f
                            best_thr[j] = 0.5 * (v + last[j])
                            best_gl[j] = gl
                            best_hl[j] = hl
                            best_cl[j] = C[nd] - accc[j]
                accg[j] += g[r]
                acch[j] += h[r]
                accc[j] += 1
                last[j] = v
            for t in range(nt):
                j = touched[t]
                nd = level[j]
                if C[nd] - accc[j] > 0:
                    gr = accg[j]
                    hr = acch[j]
                    gl = G[nd] - gr
                    hl = H[nd] - hr
                    if hl >= min_child_weight and hr >= min_child_weight:
                        gain = _xgb_gain(gl, hl, gr, hr, G[nd], H[nd], lam, gamma)
                        if gain > best_gain[j]:
                            best_gain[j] = gain
                            best_f[j] = f
                            best_thr[j] = 0.5 * last[j]
                            best_gl[j] = gl
                            best_hl[j] = hl
                            best_cl[j] = C[nd] - accc[j]
                accg[j] = 0.0
                acch[j] = 0.0
                accc[j] = 0.0

        n_split = 0
        for j in range(L):
            if best_f[j] >= 0:
                n_split += 1
        new_level = np.empty(2 * n_split, np.int64)
        q = 0
        for j in range(L):
            nd = level[j]
            if best_f[j] < 0:
                continue
            ln = n_nodes
            rn = n_nodes + 1
            n_nodes += 2
            feature[nd] = best_f[j]
            threshold[nd] = best_thr[j]
            left[nd] = ln
            right[nd] = rn
            parent[ln] = nd
            parent[rn] = nd
            G[ln] = best_gl[j]
            H[ln] = best_hl[j]
            C[ln] = best_cl[j]
            G[rn] = G[nd] - best_gl[j]
            H[rn] = H[nd] - best_hl[j]
            C[rn] = C[nd] - best_cl[j]
            new_level[q] = ln
            new_level[q + 1] = rn
            q += 2
        for j in range(L):
            loc[level[j]] = -1
        if n_split == 0:
            break
        for i in range(n):
            nd = node_of[i]
            # rows only ever sit in leaves, so an internal node here was split just now
            if feature[nd] >= 0:
                node_of[i] = left[nd]
        done = np.zeros(n_features, np.bool_)
        for j in range(L):
            f = best_f[j]
            if f < 0 or done[f]:
                continue
            done[f] = True
            for e in range(col_ptr[f], col_ptr[f + 1]):
                r = col_rows[e]
                ch = node_of[r]
                p = parent[ch]
                if p >= 0 and feature[p] == f and left[p] == ch and col_vals[e] > threshold[p]:
                    node_of[r] = right[p]
        level = new_level

    return (feature[:n_nodes], threshold[:n_nodes], left[:n_nodes], right[:n_nodes],
            G[:n_nodes], H[:n_nodes], node_of)
