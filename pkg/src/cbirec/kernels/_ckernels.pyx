# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for weight construction, propagation, ranking and metrics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from libc.stdlib cimport qsort
from libc.string cimport memset

cnp.import_array()

ctypedef cnp.int64_t idx_t

cdef double TIE_RTOL = 1e-12


cdef int _cmp_idx(const void* a, const void* b) noexcept nogil:
    cdef idx_t x = (<idx_t*>a)[0]
    cdef idx_t y = (<idx_t*>b)[0]
    return (x > y) - (x < y)


def nbi_columns(const idx_t[::1] obj_indptr, const idx_t[::1] obj_users,
                const idx_t[::1] user_indptr, const idx_t[::1] user_objects,
                Py_ssize_t n):
    """CSC arrays of the mass-diffusion matrix, one source column at a time."""
    cdef Py_ssize_t j, p, q, i, t, nt, l, k_o
    cdef double inv_ku
    cdef double[::1] acc = np.zeros(n)
    cdef idx_t[::1] touched = np.empty(n, dtype=np.int64)
    cdef char[::1] seen = np.zeros(n, dtype=np.int8)
    cdef idx_t[::1] indptr = np.zeros(n + 1, dtype=np.int64)

    cdef Py_ssize_t cap = max(16, 4 * obj_users.shape[0])
    cdef Py_ssize_t nnz = 0
    indices_arr = np.empty(cap, dtype=np.int64)
    data_arr = np.empty(cap, dtype=np.float64)
    cdef idx_t[::1] indices = indices_arr
    cdef double[::1] data = data_arr

    for j in range(n):
        k_o = obj_indptr[j + 1] - obj_indptr[j]
        nt = 0
        if k_o > 0:
            with nogil:
                for p in range(obj_indptr[j], obj_indptr[j + 1]):
                    l = obj_users[p]
                    inv_ku = 1.0 / (user_indptr[l + 1] - user_indptr[l])
                    for q in range(user_indptr[l], user_indptr[l + 1]):
                        i = user_objects[q]
                        if not seen[i]:
                            seen[i] = 1
                            touched[nt] = i
                            nt += 1
                        acc[i] += inv_ku
                qsort(&touched[0], nt, sizeof(idx_t), _cmp_idx)
            if nnz + nt > cap:
                while nnz + nt > cap:
                    cap *= 2
                indices_arr = np.resize(indices_arr, cap)
                data_arr = np.resize(data_arr, cap)
                indices = indices_arr
                data = data_arr
            with nogil:
                for t in range(nt):
                    i = touched[t]
                    indices[nnz] = i
                    data[nnz] = acc[i] / k_o
                    nnz += 1
                    acc[i] = 0.0
                    seen[i] = 0
        indptr[j + 1] = nnz
    return np.asarray(indptr), indices_arr[:nnz].copy(), data_arr[:nnz].copy()


def propagate(const idx_t[::1] indptr, const idx_t[::1] indices, const double[::1] data,
              const idx_t[::1] cols, Py_ssize_t n):
    cdef Py_ssize_t c, j, p
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    with nogil:
        for c in range(cols.shape[0]):
            j = cols[c]
            for p in range(indptr[j], indptr[j + 1]):
                out[indices[p]] += data[p]
    return out_arr


def propagate_rows(const idx_t[::1] indptr, const idx_t[::1] indices, const double[::1] data,
                   const idx_t[::1] prof_indptr, const idx_t[::1] prof_objects,
                   const idx_t[::1] rows, Py_ssize_t n):
    cdef Py_ssize_t r, u, q, j, p
    cdef Py_ssize_t nr = rows.shape[0]
    out_arr = np.zeros((nr, n))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for r in range(nr):
            u = rows[r]
            for q in range(prof_indptr[u], prof_indptr[u + 1]):
                j = prof_objects[q]
                for p in range(indptr[j], indptr[j + 1]):
                    out[r, indices[p]] += data[p]
    return out_arr


cdef inline bint _worse(double sa, idx_t ja, double sb, idx_t jb) noexcept nogil:
    # ranking order: higher score first, then lower index
    return sa < sb or (sa == sb and ja > jb)


cdef void _sift_down(double* hs, idx_t* hj, Py_ssize_t size, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t c
    cdef double s = hs[i]
    cdef idx_t j = hj[i]
    while True:
        c = 2 * i + 1
        if c >= size:
            break
        if c + 1 < size and _worse(hs[c + 1], hj[c + 1], hs[c], hj[c]):
            c += 1
        if not _worse(hs[c], hj[c], s, j):
            break
        hs[i] = hs[c]
        hj[i] = hj[c]
        i = c
    hs[i] = s
    hj[i] = j


def top_l_rows(const double[:, ::1] scores, const idx_t[::1] prof_indptr,
               const idx_t[::1] prof_objects, const idx_t[::1] rows, Py_ssize_t L):
    """Top-L column indices per row by (score desc, index asc), skipping each row's profile.

    A bounded min-heap keeps the current L best; its root is the worst kept
    entry.  Columns arrive in ascending index order, so a newcomer that only
    ties the root never displaces it.
    """
    cdef Py_ssize_t nr = scores.shape[0], n = scores.shape[1]
    cdef Py_ssize_t r, u, q, j, size, i, p
    cdef double s
    out_arr = np.full((nr, L), -1, dtype=np.int64)
    cdef idx_t[:, ::1] out = out_arr
    cdef double[::1] hs_arr = np.empty(max(L, 1))
    cdef idx_t[::1] hj_arr = np.empty(max(L, 1), dtype=np.int64)
    cdef double* hs = &hs_arr[0]
    cdef idx_t* hj = &hj_arr[0]
    cdef char[::1] excl = np.zeros(max(n, 1), dtype=np.int8)
    with nogil:
        for r in range(nr):
            u = rows[r]
            for q in range(prof_indptr[u], prof_indptr[u + 1]):
                excl[prof_objects[q]] = 1
            size = 0
            for j in range(n):
                s = scores[r, j]
                if size == L:
                    if not (s > hs[0]) or excl[j]:
                        continue
                    hs[0] = s
                    hj[0] = j
                    _sift_down(hs, hj, size, 0)
                elif not excl[j]:
                    # sift up
                    i = size
                    size += 1
                    while i > 0:
                        p = (i - 1) >> 1
                        if not _worse(s, j, hs[p], hj[p]):
                            break
                        hs[i] = hs[p]
                        hj[i] = hj[p]
                        i = p
                    hs[i] = s
                    hj[i] = j
            # pop worst-first into the tail of the output row
            while size > 0:
                size -= 1
                out[r, size] = hj[0]
                hs[0] = hs[size]
                hj[0] = hj[size]
                _sift_down(hs, hj, size, 0)
            for q in range(prof_indptr[u], prof_indptr[u + 1]):
                excl[prof_objects[q]] = 0
    return out_arr


def hit_rows(const idx_t[:, ::1] lists, const idx_t[::1] indptr, const idx_t[::1] objects,
             Py_ssize_t n):
    """``hits[u, c]`` is 1 when ``lists[u, c]`` is one of user u's objects in the given graph."""
    cdef Py_ssize_t nr = lists.shape[0], width = lists.shape[1]
    cdef Py_ssize_t u, q, c
    cdef idx_t o
    out_arr = np.zeros((nr, width), dtype=np.bool_)
    cdef cnp.npy_bool[:, ::1] out = out_arr
    cdef char[::1] mark = np.zeros(max(n, 1), dtype=np.int8)
    with nogil:
        for u in range(nr):
            if indptr[u + 1] == indptr[u]:
                continue
            for q in range(indptr[u], indptr[u + 1]):
                mark[objects[q]] = 1
            for c in range(width):
                o = lists[u, c]
                if o >= 0 and mark[o]:
                    out[u, c] = 1
            for q in range(indptr[u], indptr[u + 1]):
                mark[objects[q]] = 0
    return out_arr


def auc_tally(const double[::1] rel, const double[::1] irr):
    cdef Py_ssize_t i, nn = rel.shape[0]
    cdef long long wins = 0, ties = 0
    cdef double a, b, scale
    with nogil:
        for i in range(nn):
            a = rel[i]
            b = irr[i]
            scale = 1.0
            if fabs(a) > scale:
                scale = fabs(a)
            if fabs(b) > scale:
                scale = fabs(b)
            if fabs(a - b) <= TIE_RTOL * scale:
                ties += 1
            elif a > b:
                wins += 1
    return int(wins), int(ties)


def auc_tally_rows(const double[:, ::1] scores, const idx_t[::1] rows,
                   const idx_t[::1] rel, const idx_t[::1] irr):
    """Like :func:`auc_tally` but gathers ``scores[rows, rel]`` and ``scores[rows, irr]``."""
    cdef Py_ssize_t i, nn = rows.shape[0]
    cdef long long wins = 0, ties = 0
    cdef double a, b, scale
    with nogil:
        for i in range(nn):
            a = scores[rows[i], rel[i]]
            b = scores[rows[i], irr[i]]
            scale = 1.0
            if fabs(a) > scale:
                scale = fabs(a)
            if fabs(b) > scale:
                scale = fabs(b)
            if fabs(a - b) <= TIE_RTOL * scale:
                ties += 1
            elif a > b:
                wins += 1
    return int(wins), int(ties)


def intra_similarity_rows(const idx_t[:, :] lists, const idx_t[::1] obj_indptr,
                          const idx_t[::1] obj_users, Py_ssize_t num_users):
    """Mean pairwise Sorensen similarity inside each list (NaN for lists shorter than 2).

    Uses sum_{a != b} s_ab = |sum_a A_a / sqrt(k_a)|^2 - #{a : k_a > 0}.
    """
    cdef Py_ssize_t nr = lists.shape[0], width = lists.shape[1]
    cdef Py_ssize_t r, c, a, p, l, length, nt, t
    cdef double w, sumsq, self_terms
    cdef double[::1] acc = np.zeros(max(num_users, 1))
    cdef idx_t[::1] touched = np.empty(max(num_users, 1), dtype=np.int64)
    cdef char[::1] seen = np.zeros(max(num_users, 1), dtype=np.int8)
    out_arr = np.full(nr, np.nan)
    cdef double[::1] out = out_arr
    with nogil:
        for r in range(nr):
            length = 0
            nt = 0
            self_terms = 0.0
            for c in range(width):
                a = lists[r, c]
                if a < 0:
                    continue
                length += 1
                if obj_indptr[a + 1] == obj_indptr[a]:
                    continue
                self_terms += 1.0
                w = 1.0 / sqrt(<double>(obj_indptr[a + 1] - obj_indptr[a]))
                for p in range(obj_indptr[a], obj_indptr[a + 1]):
                    l = obj_users[p]
                    if not seen[l]:
                        seen[l] = 1
                        touched[nt] = l
                        nt += 1
                    acc[l] += w
            sumsq = 0.0
            for t in range(nt):
                l = touched[t]
                sumsq += acc[l] * acc[l]
                acc[l] = 0.0
                seen[l] = 0
            if length >= 2:
                w = sumsq - self_terms
                if w < 0.0:
                    w = 0.0
                out[r] = w / (length * (length - 1))
    return out_arr
