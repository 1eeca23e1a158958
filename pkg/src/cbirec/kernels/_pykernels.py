"""Pure numpy/scipy implementations of the hot kernels.

Signatures mirror the compiled module one for one.  All index arrays are
int64 and all value arrays float64.
"""
import numpy as np
import scipy.sparse as sp

from cbirec.kernels._common import TIE_RTOL


def _inv(deg):
    out = np.zeros(len(deg))
    nz = deg > 0
    out[nz] = 1.0 / deg[nz]
    return out


def nbi_columns(obj_indptr, obj_users, user_indptr, user_objects, n):
    m = len(user_indptr) - 1
    k_obj = np.diff(obj_indptr)
    k_user = np.diff(user_indptr)
    a = sp.csr_matrix((np.ones(len(obj_users)), obj_users, obj_indptr), shape=(n, m))
    w = (a @ sp.diags(_inv(k_user)) @ a.T @ sp.diags(_inv(k_obj))).tocsc()
    w.eliminate_zeros()
    w.sort_indices()
    return (w.indptr.astype(np.int64), w.indices.astype(np.int64), w.data.astype(np.float64))


def _pow0(x, lx, e):
    if e == 1.0:
        return x.copy()
    if e == 0.0:
        return (x > 0).astype(np.float64)
    out = np.exp(e * lx)
    out[x <= 0] = 0.0
    return out


def ucbi_values(forward, reverse, log_forward, log_reverse, alpha, beta):
    out = _pow0(forward, log_forward, alpha)
    out += _pow0(reverse, log_reverse, beta)
    return out


def propagate(indptr, indices, data, cols, n):
    w = sp.csc_matrix((data, indices, indptr), shape=(n, n))
    return np.asarray(w[:, cols].sum(axis=1)).ravel()


def propagate_rows(indptr, indices, data, prof_indptr, prof_objects, rows, n):
    w = sp.csc_matrix((data, indices, indptr), shape=(n, n))
    f = sp.csr_matrix(
        (np.ones(len(prof_objects)), prof_objects, prof_indptr),
        shape=(len(prof_indptr) - 1, n),
    )[rows]
    return np.ascontiguousarray((f @ w.T).toarray())


def top_l_rows(scores, prof_indptr, prof_objects, rows, L):
    r, n = scores.shape
    s = np.array(scores, dtype=np.float64)
    counts = prof_indptr[rows + 1] - prof_indptr[rows]
    row_ids = np.repeat(np.arange(r), counts)
    cols = np.concatenate([prof_objects[prof_indptr[u]:prof_indptr[u + 1]] for u in rows]) \
        if r else np.zeros(0, dtype=np.int64)
    s[row_ids, cols] = -np.inf
    order = np.argsort(-s, axis=1, kind="stable")[:, :L]
    out = np.full((r, L), -1, dtype=np.int64)
    take = order.shape[1]
    out[:, :take] = order
    valid = np.minimum(n - counts, L)
    out[np.arange(L)[None, :] >= valid[:, None]] = -1
    return out


def hit_rows(lists, indptr, objects, n):
    m = len(indptr) - 1
    owners = np.repeat(np.arange(m, dtype=np.int64), np.diff(indptr))
    keys = owners * n + objects
    if len(keys) == 0:
        return np.zeros(lists.shape, dtype=bool)
    query = np.arange(lists.shape[0], dtype=np.int64)[:, None] * n + lists
    pos = np.minimum(np.searchsorted(keys, query), len(keys) - 1)
    return (lists >= 0) & (keys[pos] == query)


def auc_tally(rel, irr):
    rel = np.asarray(rel, dtype=np.float64)
    irr = np.asarray(irr, dtype=np.float64)
    scale = np.maximum(1.0, np.maximum(np.abs(rel), np.abs(irr)))
    tie = np.abs(rel - irr) <= TIE_RTOL * scale
    wins = int(np.count_nonzero((rel > irr) & ~tie))
    return wins, int(np.count_nonzero(tie))


def auc_tally_rows(scores, rows, rel, irr):
    flat = scores.ravel()
    n = scores.shape[1]
    return auc_tally(flat[rows * n + rel], flat[rows * n + irr])


def intra_similarity_rows(lists, obj_indptr, obj_users, num_users):
    r, _ = lists.shape
    n = len(obj_indptr) - 1
    k_obj = np.diff(obj_indptr)
    inv_sqrt = np.zeros(n)
    nz = k_obj > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(k_obj[nz])
    b = sp.csr_matrix((np.ones(len(obj_users)), obj_users, obj_indptr), shape=(n, num_users))
    b = sp.diags(inv_sqrt) @ b

    valid = lists >= 0
    rows = np.nonzero(valid)[0]
    cols = lists[valid]
    x = sp.csr_matrix((np.ones(len(cols)), (rows, cols)), shape=(r, n))
    y = x @ b
    sumsq = np.asarray(y.multiply(y).sum(axis=1)).ravel()
    length = valid.sum(axis=1)
    self_terms = np.bincount(rows, weights=nz[cols].astype(float), minlength=r)
    out = np.full(r, np.nan)
    ok = length >= 2
    out[ok] = np.maximum(sumsq[ok] - self_terms[ok], 0.0) / (length[ok] * (length[ok] - 1))
    return out
