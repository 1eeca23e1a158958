"""Hot kernels, compiled when available with a numpy fallback.

The compiled module is picked at import time; set ``CBIREC_PURE_PYTHON=1`` to
force the fallback.  ``BACKEND`` names the active implementation and
:func:`get_backend` returns either module explicitly (used by tests and the
benchmark).
"""
import os

import numpy as np

from cbirec.kernels import _pykernels
from cbirec.kernels._common import TIE_RTOL

try:
    from cbirec.kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_FORCE_PURE = os.environ.get("CBIREC_PURE_PYTHON", "").strip().lower() not in ("", "0", "false", "no")

if _ckernels is not None and not _FORCE_PURE:
    _impl = _ckernels
    BACKEND = "cython"
else:
    _impl = _pykernels
    BACKEND = "python"

__all__ = [
    "BACKEND", "TIE_RTOL", "get_backend", "available_backends", "safe_log",
    "nbi_columns", "ucbi_values", "propagate", "propagate_rows",
    "top_l_rows", "hit_rows", "auc_tally", "auc_tally_rows", "intra_similarity_rows",
]


def available_backends():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get_backend(name=None):
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def _i(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def nbi_columns(obj_indptr, obj_users, user_indptr, user_objects, n, backend=None):
    return get_backend(backend).nbi_columns(
        _i(obj_indptr), _i(obj_users), _i(user_indptr), _i(user_objects), int(n))


def safe_log(x):
    """Natural log of positive entries, 0 elsewhere."""
    x = _f(x)
    out = np.zeros_like(x)
    np.log(x, out=out, where=x > 0)
    return out


def ucbi_values(forward, reverse, alpha, beta, log_forward=None, log_reverse=None):
    """``forward ** alpha + reverse ** beta`` entrywise with ``0 ** e = 0``."""
    lf = safe_log(forward) if log_forward is None else log_forward
    lr = safe_log(reverse) if log_reverse is None else log_reverse
    # numpy's vectorised exp outruns a scalar libm loop, so there is no compiled variant
    return _pykernels.ucbi_values(_f(forward), _f(reverse), _f(lf), _f(lr),
                                  float(alpha), float(beta))


def propagate(indptr, indices, data, cols, n, backend=None):
    return get_backend(backend).propagate(_i(indptr), _i(indices), _f(data), _i(cols), int(n))


def propagate_rows(indptr, indices, data, prof_indptr, prof_objects, rows, n, backend=None):
    return get_backend(backend).propagate_rows(
        _i(indptr), _i(indices), _f(data), _i(prof_indptr), _i(prof_objects), _i(rows), int(n))


def top_l_rows(scores, prof_indptr, prof_objects, rows, L, backend=None):
    return get_backend(backend).top_l_rows(
        _f(scores), _i(prof_indptr), _i(prof_objects), _i(rows), int(L))


def hit_rows(lists, indptr, objects, n, backend=None):
    return get_backend(backend).hit_rows(_i(lists), _i(indptr), _i(objects), int(n))


def auc_tally(rel, irr, backend=None):
    return get_backend(backend).auc_tally(_f(rel), _f(irr))


def auc_tally_rows(scores, rows, rel, irr, backend=None):
    """Wins and ties of ``scores[rows, rel]`` against ``scores[rows, irr]``."""
    return get_backend(backend).auc_tally_rows(_f(scores), _i(rows), _i(rel), _i(irr))


def intra_similarity_rows(lists, obj_indptr, obj_users, num_users, backend=None):
    return get_backend(backend).intra_similarity_rows(
        _i(lists), _i(obj_indptr), _i(obj_users), int(num_users))
