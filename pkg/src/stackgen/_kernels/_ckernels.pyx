# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: CART tree building/prediction and elastic-net
coordinate descent.

Mirror of _pykernels.py. Tree construction follows the reference backend
operation-for-operation (splitmix64 feature stream, sequential prefix sums,
stable (value, position) sort keys, order-preserving partitions, identical
tie-breaking), so both backends grow bitwise-identical trees. Do not
"optimize" the arithmetic here without updating the reference in lockstep.
"""

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc

cnp.import_array()

BACKEND = "compiled"

CRITERION_VARIANCE = 0
CRITERION_GINI = 1

ctypedef unsigned long long u64

cdef extern from *:
    """
    static unsigned long long sg_next_u64(unsigned long long *state) {
        *state += 0x9E3779B97F4A7C15ULL;
        unsigned long long z = *state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    """
    u64 sg_next_u64(u64 *state) nogil


cdef struct SortPair:
    double v
    long long pos


cdef inline bint _pair_lt(SortPair a, SortPair b) noexcept nogil:
    return a.v < b.v or (a.v == b.v and a.pos < b.pos)


cdef void _sort_pairs(SortPair *a, long long lo, long long hi) noexcept nogil:
    # quicksort with insertion sort below 16; keys (v, pos) are unique, so
    # any comparison sort yields the permutation of a stable sort by v
    cdef long long i, j, mid, li, ri
    cdef SortPair tmp, pivot
    while hi - lo > 16:
        mid = lo + (hi - lo) // 2
        if _pair_lt(a[mid], a[lo]):
            tmp = a[lo]; a[lo] = a[mid]; a[mid] = tmp
        if _pair_lt(a[hi - 1], a[lo]):
            tmp = a[lo]; a[lo] = a[hi - 1]; a[hi - 1] = tmp
        if _pair_lt(a[hi - 1], a[mid]):
            tmp = a[mid]; a[mid] = a[hi - 1]; a[hi - 1] = tmp
        pivot = a[mid]
        li = lo
        ri = hi - 1
        while True:
            li += 1
            while _pair_lt(a[li], pivot):
                li += 1
            ri -= 1
            while _pair_lt(pivot, a[ri]):
                ri -= 1
            if li >= ri:
                break
            tmp = a[li]; a[li] = a[ri]; a[ri] = tmp
        if ri - lo < hi - ri:
            _sort_pairs(a, lo, ri + 1)
            lo = ri + 1
        else:
            _sort_pairs(a, ri + 1, hi)
            hi = ri + 1
    for i in range(lo + 1, hi):
        tmp = a[i]
        j = i
        while j > lo and _pair_lt(tmp, a[j - 1]):
            a[j] = a[j - 1]
            j -= 1
        a[j] = tmp


def build_tree(X, target, hess, rows, int criterion, long long max_depth,
               long long min_samples_leaf, long long max_features, seed):
    """Grow one CART tree; see the reference backend for the contract."""
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef double[::1] tv = np.asarray(target, dtype=np.float64)
    cdef double[::1] hv = np.asarray(hess, dtype=np.float64)
    cdef long long[::1] rowsv = np.ascontiguousarray(rows, dtype=np.int64)

    cdef long long n_rows = rowsv.shape[0]
    cdef long long p = Xv.shape[1]
    cdef u64 rng = <u64> (int(seed) & 0xFFFFFFFFFFFFFFFF)
    if max_depth < 0:
        max_depth = 1 << 30

    cdef long long cap = 2 * n_rows + 1
    feature_arr = np.full(cap, -1, dtype=np.int32)
    threshold_arr = np.zeros(cap, dtype=np.float64)
    left_arr = np.full(cap, -1, dtype=np.int32)
    right_arr = np.full(cap, -1, dtype=np.int32)
    value_arr = np.zeros(cap, dtype=np.float64)
    cdef int[::1] feature = feature_arr
    cdef double[::1] threshold = threshold_arr
    cdef int[::1] left = left_arr
    cdef int[::1] right = right_arr
    cdef double[::1] value = value_arr

    cdef long long *work = <long long *> malloc(n_rows * sizeof(long long))
    cdef long long *scratch = <long long *> malloc(n_rows * sizeof(long long))
    cdef SortPair *pairs = <SortPair *> malloc(n_rows * sizeof(SortPair))
    cdef double *cum = <double *> malloc(n_rows * sizeof(double))
    cdef long long *feats = <long long *> malloc(p * sizeof(long long))
    # each split pushes 2 frames and pops 1: depth of the frame stack is
    # bounded by the leaf count, so 4 longs per possible node suffice
    cdef long long *stack = <long long *> malloc(4 * cap * sizeof(long long))
    if work == NULL or scratch == NULL or pairs == NULL or cum == NULL \
            or feats == NULL or stack == NULL:
        free(work); free(scratch); free(pairs); free(cum); free(feats); free(stack)
        raise MemoryError()

    cdef long long n_nodes = 0, sp = 0
    cdef long long s, e, m, depth, nid, lid, rid
    cdef long long i, j, k, f, ci, n_cand, best_f, nl
    cdef double sum_t, sum_h, tmin, tmax, ti
    cdef double tot, ls, ncl, ncr, sc, thr
    cdef double best_score, best_thr, f_score, f_thr
    cdef double neg_l, pos_r, neg_r
    cdef bint f_found

    with nogil:
        for i in range(n_rows):
            work[i] = rowsv[i]
        n_nodes = 1
        stack[0] = 0; stack[1] = n_rows; stack[2] = 0; stack[3] = 0
        sp = 4
        while sp > 0:
            sp -= 4
            s = stack[sp]; e = stack[sp + 1]; depth = stack[sp + 2]; nid = stack[sp + 3]
            m = e - s

            sum_t = 0.0
            sum_h = 0.0
            tmin = tv[work[s]]
            tmax = tmin
            for i in range(s, e):
                ti = tv[work[i]]
                sum_t = sum_t + ti
                sum_h = sum_h + hv[work[i]]
                if ti < tmin:
                    tmin = ti
                if ti > tmax:
                    tmax = ti
            value[nid] = sum_t / sum_h if sum_h > 0.0 else 0.0

            if depth >= max_depth or m < 2 * min_samples_leaf or tmin == tmax:
                continue

            if max_features < p:
                for j in range(p):
                    feats[j] = j
                for i in range(max_features):
                    j = i + <long long> (sg_next_u64(&rng) % <u64> (p - i))
                    k = feats[i]; feats[i] = feats[j]; feats[j] = k
                # ascending candidate order = lowest-column tie-break
                for i in range(1, max_features):
                    k = feats[i]
                    j = i
                    while j > 0 and feats[j - 1] > k:
                        feats[j] = feats[j - 1]
                        j -= 1
                    feats[j] = k
                n_cand = max_features
            else:
                for j in range(p):
                    feats[j] = j
                n_cand = p

            best_score = 0.0
            best_f = -1
            best_thr = 0.0
            for ci in range(n_cand):
                f = feats[ci]
                for i in range(m):
                    pairs[i].v = Xv[work[s + i], f]
                    pairs[i].pos = i
                _sort_pairs(pairs, 0, m)
                if pairs[0].v == pairs[m - 1].v:
                    continue
                tot = 0.0
                for i in range(m):
                    tot = tot + tv[work[s + pairs[i].pos]]
                    cum[i] = tot
                f_found = False
                f_score = 0.0
                f_thr = 0.0
                for i in range(m - 1):
                    ncl = <double> (i + 1)
                    ncr = <double> (m - i - 1)
                    if pairs[i].v < pairs[i + 1].v and ncl >= <double> min_samples_leaf \
                            and ncr >= <double> min_samples_leaf:
                        ls = cum[i]
                        if criterion == 0:
                            sc = ls * ls / ncl + (tot - ls) * (tot - ls) / ncr
                        else:
                            neg_l = ncl - ls
                            pos_r = tot - ls
                            neg_r = ncr - pos_r
                            sc = (ls * ls + neg_l * neg_l) / ncl \
                                + (pos_r * pos_r + neg_r * neg_r) / ncr
                        if (not f_found) or sc > f_score:
                            f_found = True
                            f_score = sc
                            thr = (pairs[i].v + pairs[i + 1].v) / 2.0
                            if thr == pairs[i + 1].v:
                                thr = pairs[i].v
                            f_thr = thr
                if f_found and (best_f < 0 or f_score > best_score):
                    best_score = f_score
                    best_f = f
                    best_thr = f_thr

            if best_f < 0:
                continue

            # order-preserving partition: left block, then right block
            nl = 0
            for i in range(s, e):
                if Xv[work[i], best_f] <= best_thr:
                    scratch[nl] = work[i]
                    nl += 1
            k = nl
            for i in range(s, e):
                if not (Xv[work[i], best_f] <= best_thr):
                    scratch[k] = work[i]
                    k += 1
            for i in range(m):
                work[s + i] = scratch[i]

            lid = n_nodes
            rid = n_nodes + 1
            n_nodes += 2
            feature[nid] = <int> best_f
            threshold[nid] = best_thr
            left[nid] = <int> lid
            right[nid] = <int> rid
            stack[sp] = s + nl; stack[sp + 1] = e; stack[sp + 2] = depth + 1; stack[sp + 3] = rid
            sp += 4
            stack[sp] = s; stack[sp + 1] = s + nl; stack[sp + 2] = depth + 1; stack[sp + 3] = lid
            sp += 4

    free(work); free(scratch); free(pairs); free(cum); free(feats); free(stack)
    return (feature_arr[:n_nodes].copy(), threshold_arr[:n_nodes].copy(),
            left_arr[:n_nodes].copy(), right_arr[:n_nodes].copy(),
            value_arr[:n_nodes].copy())


def predict_tree(feature, threshold, left, right, value, X):
    """Route every row of X to its leaf and return the leaf values."""
    cdef int[::1] fv = np.ascontiguousarray(feature, dtype=np.int32)
    cdef double[::1] thv = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef int[::1] lv = np.ascontiguousarray(left, dtype=np.int32)
    cdef int[::1] rv = np.ascontiguousarray(right, dtype=np.int32)
    cdef double[::1] vv = np.ascontiguousarray(value, dtype=np.float64)
    cdef double[:, ::1] Xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef long long n = Xv.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef long long i
    cdef int nid
    with nogil:
        for i in range(n):
            nid = 0
            while fv[nid] >= 0:
                if Xv[i, fv[nid]] <= thv[nid]:
                    nid = lv[nid]
                else:
                    nid = rv[nid]
            out[i] = vv[nid]
    return out_arr


def enet_cd(X, Xw, col_sq, r, b, double l1, double l2, long long max_iter,
            double tol):
    """Cyclic coordinate-descent sweeps; see the reference backend."""
    cdef double[::1, :] Xv = np.asfortranarray(X, dtype=np.float64)
    cdef double[::1, :] Xwv = np.asfortranarray(Xw, dtype=np.float64)
    cdef double[::1] cs = np.ascontiguousarray(col_sq, dtype=np.float64)
    cdef double[::1] rv = r
    cdef double[::1] bv = b
    cdef long long n = Xv.shape[0]
    cdef long long p = bv.shape[0]
    cdef long long it, i, j
    cdef long long result = -max_iter
    cdef double rho, bn, d, delta_max, cj
    with nogil:
        for it in range(1, max_iter + 1):
            delta_max = 0.0
            for j in range(p):
                cj = cs[j]
                if cj <= 0.0:
                    continue
                rho = 0.0
                for i in range(n):
                    rho += Xwv[i, j] * rv[i]
                rho += cj * bv[j]
                if rho > l1:
                    bn = (rho - l1) / (cj + l2)
                elif rho < -l1:
                    bn = (rho + l1) / (cj + l2)
                else:
                    bn = 0.0
                d = bn - bv[j]
                if d != 0.0:
                    for i in range(n):
                        rv[i] -= d * Xv[i, j]
                    bv[j] = bn
                    if d < 0.0:
                        d = -d
                    if d > delta_max:
                        delta_max = d
            if delta_max <= tol:
                result = it
                break
    return result
