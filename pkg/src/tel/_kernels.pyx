# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernels: MST rounds, tree rooting, two-pass filtering.

Signatures mirror tel._kernels_py; arrays are int64/float64 and
C-contiguous.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64

COMPILED = True


def tree_pass(i64[::1] parent, i64[::1] order, f64[::1] t, f64[:, ::1] values,
              i64[::1] level_starts):
    cdef Py_ssize_t n = parent.shape[0]
    cdef Py_ssize_t nc = values.shape[1]
    cdef Py_ssize_t k, c, i, p
    cdef f64 ti
    up_arr = np.array(values, dtype=np.float64, copy=True)
    cdef f64[:, ::1] up = up_arr
    with nogil:
        for k in range(n - 1, 0, -1):
            i = order[k]
            p = parent[i]
            ti = t[i]
            for c in range(nc):
                up[p, c] += ti * up[i, c]
    full_arr = up_arr.copy()
    cdef f64[:, ::1] full = full_arr
    with nogil:
        for k in range(1, n):
            i = order[k]
            p = parent[i]
            ti = t[i]
            for c in range(nc):
                full[i, c] = up[i, c] + ti * (full[p, c] - ti * up[i, c])
    return up_arr, full_arr


cdef inline i64 _find(i64[::1] label, i64 x) nogil:
    while label[x] != x:
        label[x] = label[label[x]]
        x = label[x]
    return x


def boruvka(Py_ssize_t num_nodes, i64[::1] eu, i64[::1] ev, f64[::1] w):
    cdef Py_ssize_t m = eu.shape[0]
    cdef Py_ssize_t e, i, chosen_count = 0
    cdef i64 ru, rv, be
    cdef bint progress, external
    label_arr = np.arange(num_nodes, dtype=np.int64)
    rank_arr = np.zeros(num_nodes, dtype=np.int64)
    best_arr = np.full(num_nodes, -1, dtype=np.int64)
    alive_arr = np.ones(m, dtype=np.int64)
    chosen_arr = np.empty(max(num_nodes - 1, 0), dtype=np.int64)
    cdef i64[::1] label = label_arr
    cdef i64[::1] rank = rank_arr
    cdef i64[::1] best = best_arr
    cdef i64[::1] alive = alive_arr
    cdef i64[::1] chosen = chosen_arr
    if num_nodes <= 1:
        return chosen_arr[:0]
    while True:
        external = False
        with nogil:
            for e in range(m):
                if not alive[e]:
                    continue
                ru = _find(label, eu[e])
                rv = _find(label, ev[e])
                if ru == rv:
                    alive[e] = 0
                    continue
                external = True
                be = best[ru]
                if be < 0 or w[e] < w[be] or (w[e] == w[be] and e < be):
                    best[ru] = e
                be = best[rv]
                if be < 0 or w[e] < w[be] or (w[e] == w[be] and e < be):
                    best[rv] = e
        if not external:
            break
        progress = False
        for i in range(num_nodes):
            be = best[i]
            best[i] = -1
            if be < 0:
                continue
            ru = _find(label, eu[be])
            rv = _find(label, ev[be])
            if ru == rv:
                continue
            if rank[ru] < rank[rv]:
                label[ru] = rv
            elif rank[rv] < rank[ru]:
                label[rv] = ru
            else:
                label[rv] = ru
                rank[ru] += 1
            chosen[chosen_count] = be
            chosen_count += 1
            progress = True
        if not progress:
            break
    out = chosen_arr[:chosen_count].copy()
    out.sort()
    return out


def bfs_tree(i64[::1] indptr, i64[::1] indices, f64[::1] ew, Py_ssize_t root):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t head = 0, tail = 1, level_end = 1, n_levels = 1
    cdef i64 i, j
    cdef Py_ssize_t ptr
    parent_arr = np.full(n, -1, dtype=np.int64)
    pw_arr = np.zeros(n, dtype=np.float64)
    order_arr = np.empty(n, dtype=np.int64)
    seen_arr = np.zeros(n, dtype=np.int64)
    starts_arr = np.empty(n + 1, dtype=np.int64)
    cdef i64[::1] parent = parent_arr
    cdef f64[::1] pw = pw_arr
    cdef i64[::1] order = order_arr
    cdef i64[::1] seen = seen_arr
    cdef i64[::1] starts = starts_arr
    order[0] = root
    seen[root] = True
    starts[0] = 0
    starts[1] = 1
    with nogil:
        while head < tail:
            i = order[head]
            head += 1
            for ptr in range(indptr[i], indptr[i + 1]):
                j = indices[ptr]
                if not seen[j]:
                    seen[j] = True
                    parent[j] = i
                    pw[j] = ew[ptr]
                    order[tail] = j
                    tail += 1
            if head == level_end and tail > level_end:
                starts[n_levels + 1] = tail
                n_levels += 1
                level_end = tail
    return parent_arr, pw_arr, order_arr[:tail], starts_arr[:n_levels + 1].copy(), tail
