"""Diffusion weight matrices, baseline scorers and top-L ranking.

Weight matrices are ``n x n`` CSR matrices indexed ``(target i, source j)``,
so a user's scores are ``f' = R f`` with ``f`` the 0/1 profile.  Entry
``(i, j)`` is stored only when objects ``i`` and ``j`` share a training user.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from cbirec import kernels
from cbirec.errors import ConfigError, DataError
from cbirec.graph import BipartiteGraph, ProfileVector

ALGORITHMS = ("GRM", "CF", "NBI", "HNBI", "CBI", "UCBI")

# The dense score path (one BLAS product) is used when n is at most DENSE_MAX_OBJECTS and
# m * n^2 multiply-adds cost less than DENSE_COST_RATIO scattered sparse updates.
DENSE_MAX_OBJECTS = 6000
DENSE_COST_RATIO = 32.0


@dataclass(frozen=True)
class AlgorithmParams:
    tag: str
    alpha: float = 1.0
    beta: float = 1.0
    theta: float = 0.0

    def __post_init__(self):
        if self.tag not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.tag!r}; choose from {', '.join(ALGORITHMS)}")
        for name in ("alpha", "beta", "theta"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    def relevant(self) -> dict:
        """Parameters that affect this algorithm (empty for parameter-free ones)."""
        if self.tag == "UCBI":
            return {"alpha": self.alpha, "beta": self.beta}
        if self.tag == "HNBI":
            return {"theta": self.theta}
        return {}


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Stored column-major: the outgoing weights of each source object are contiguous."""

    csc: sp.csc_matrix
    tag: str
    params: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.csc.shape[0]

    @property
    def nnz(self) -> int:
        return self.csc.nnz

    @cached_property
    def matrix(self) -> sp.csr_matrix:
        m = self.csc.tocsr()
        m.sort_indices()
        return m

    def get(self, i: int, j: int) -> float:
        col = slice(self.csc.indptr[j], self.csc.indptr[j + 1])
        rows = self.csc.indices[col]
        pos = np.searchsorted(rows, i)
        if pos < len(rows) and rows[pos] == i:
            return float(self.csc.data[col][pos])
        return 0.0

    def toarray(self) -> np.ndarray:
        return self.csc.toarray()

    def same_as(self, other: "WeightMatrix") -> bool:
        """Exact equality of sparse structure and stored values."""
        a, b = self.csc, other.csc
        return (a.shape == b.shape and np.array_equal(a.indptr, b.indptr)
                and np.array_equal(a.indices, b.indices) and np.array_equal(a.data, b.data))


@dataclass(frozen=True)
class ScoreVector:
    values: np.ndarray
    excluded: np.ndarray  # sorted object indices not eligible for ranking


@dataclass(frozen=True)
class RecommendationList:
    user: int
    objects: np.ndarray
    scores: np.ndarray

    def __len__(self):
        return len(self.objects)


def _align(pattern, m) -> np.ndarray:
    """Values of ``m`` laid out on ``pattern``'s sparsity structure (zeros where absent).

    Both matrices must share a compressed format with sorted indices.
    """
    n = pattern.shape[0] + pattern.shape[1]
    pk = np.repeat(np.arange(len(pattern.indptr) - 1, dtype=np.int64), np.diff(pattern.indptr)) * n \
        + pattern.indices
    mk = np.repeat(np.arange(len(m.indptr) - 1, dtype=np.int64), np.diff(m.indptr)) * n + m.indices
    out = np.zeros(len(pk))
    out[np.searchsorted(pk, mk)] = m.data
    return out


def _readonly(m):
    m.indices.flags.writeable = False
    m.indptr.flags.writeable = False
    return m


class DiffusionCache:
    """Per-split cache of the NBI matrix and the column-normalised reverse direction.

    ``forward`` and ``reverse`` are value arrays aligned to one shared
    column-major pattern, so CBI/UCBI entries for any exponent pair are a
    single entrywise pass.
    """

    def __init__(self, graph: BipartiteGraph):
        self.graph = graph
        n = graph.num_objects
        indptr, indices, data = kernels.nbi_columns(
            graph.object_indptr, graph.object_users, graph.user_indptr, graph.user_objects, n)
        w = sp.csc_matrix((data, indices, indptr), shape=(n, n))
        w.sort_indices()
        self.nbi = w
        # c_i = sum_j' w_j'i ; zero for objects without training users
        self.column_sums = np.asarray(w.sum(axis=0)).ravel()
        inv = np.zeros(n)
        nz = self.column_sums > 0
        inv[nz] = 1.0 / self.column_sums[nz]
        rev = (sp.diags(inv) @ w.T).tocsc()
        rev.eliminate_zeros()
        rev.sort_indices()

        pattern = (abs(w) + abs(rev)).tocsc()
        pattern.sort_indices()
        self.pattern = _readonly(pattern)
        self.forward = _align(pattern, w)
        self.reverse = _align(pattern, rev)
        self.log_forward = kernels.safe_log(self.forward)
        self.log_reverse = kernels.safe_log(self.reverse)

    def weight_matrix(self, values: np.ndarray, tag: str, params=None) -> "WeightMatrix":
        """Weights on the shared pattern; index arrays are shared, not copied."""
        p = self.pattern
        m = sp.csc_matrix((values, p.indices, p.indptr), shape=p.shape, copy=False)
        m.has_sorted_indices = True
        return WeightMatrix(m, tag, params or {})


def _cache(graph, cache):
    if cache is None:
        return DiffusionCache(graph)
    if cache.graph is not graph:
        raise ValueError("cache was built for a different graph")
    return cache


def nbi_weights(graph: BipartiteGraph, cache: DiffusionCache | None = None) -> WeightMatrix:
    c = _cache(graph, cache)
    return WeightMatrix(c.nbi.copy(), "NBI")


def hnbi_weights(graph: BipartiteGraph, theta: float,
                 cache: DiffusionCache | None = None) -> WeightMatrix:
    """NBI with every source column ``j`` scaled by ``k(o_j) ** theta``."""
    c = _cache(graph, cache)
    w = c.nbi.copy()
    if theta != 0.0:
        k = graph.object_degree.astype(np.float64)
        scale = np.zeros_like(k)
        scale[k > 0] = np.power(k[k > 0], theta)
        w.data = w.data * np.repeat(scale, np.diff(w.indptr))
    return WeightMatrix(w, "HNBI", {"theta": float(theta)})


def cbi_weights(graph: BipartiteGraph, cache: DiffusionCache | None = None) -> WeightMatrix:
    c = _cache(graph, cache)
    return c.weight_matrix(c.forward + c.reverse, "CBI")


def ucbi_weights(graph: BipartiteGraph, alpha: float, beta: float,
                 cache: DiffusionCache | None = None) -> WeightMatrix:
    """``r_ij = w_ij ** alpha + (w_ji / c_i) ** beta`` with ``0 ** x = 0`` for every ``x``."""
    c = _cache(graph, cache)
    values = kernels.ucbi_values(c.forward, c.reverse, alpha, beta, c.log_forward, c.log_reverse)
    return c.weight_matrix(values, "UCBI", {"alpha": float(alpha), "beta": float(beta)})


def weights_for(params: AlgorithmParams, graph: BipartiteGraph,
                cache: DiffusionCache | None = None) -> WeightMatrix:
    if params.tag == "NBI":
        return nbi_weights(graph, cache)
    if params.tag == "HNBI":
        return hnbi_weights(graph, params.theta, cache)
    if params.tag == "CBI":
        return cbi_weights(graph, cache)
    if params.tag == "UCBI":
        return ucbi_weights(graph, params.alpha, params.beta, cache)
    raise ValueError(f"{params.tag} has no weight matrix")


def propagate(weights: WeightMatrix, profile: ProfileVector) -> ScoreVector:
    if profile.size != weights.n:
        raise ValueError(f"profile over {profile.size} objects, weights over {weights.n}")
    w = weights.csc
    values = kernels.propagate(w.indptr, w.indices, w.data, profile.indices, weights.n)
    return ScoreVector(values, np.asarray(profile.indices))


def grm_scores(graph: BipartiteGraph, user: int) -> ScoreVector:
    return ScoreVector(graph.object_degree.astype(np.float64), graph.profile(user))


def cf_scores(graph: BipartiteGraph, user: int) -> ScoreVector:
    """User-based CF with Sorensen similarity, excluding the user from its own neighbourhood."""
    sims = user_similarities(graph, user)
    total = sims.sum()
    if total <= 0:
        return ScoreVector(np.zeros(graph.num_objects), graph.profile(user))
    values = (graph.adjacency @ sims) / total
    return ScoreVector(values, graph.profile(user))


def user_similarities(graph: BipartiteGraph, user: int) -> np.ndarray:
    """Sorensen similarity of ``user`` to every user, computed from object audiences."""
    sims = np.zeros(graph.num_users)
    for obj in graph.profile(user):
        sims[graph.audience(obj)] += 1.0
    sims[user] = 0.0
    k = graph.user_degree.astype(np.float64)
    nz = sims > 0
    sims[nz] /= np.sqrt(k[user] * k[nz])
    return sims


def top_l(scores: ScoreVector, graph: BipartiteGraph, user: int, L: int) -> RecommendationList:
    """Top-``L`` uncollected objects by score, ties broken by ascending object index."""
    if L < 1:
        raise ValueError("L must be >= 1")
    idx = kernels.top_l_rows(scores.values[None, :], graph.user_indptr, graph.user_objects,
                             np.array([user]), L)[0]
    idx = idx[idx >= 0]
    return RecommendationList(user, idx, scores.values[idx])


# -- batch scorers used by the evaluation pass ------------------------------------------------

class Scorer:
    """Produces dense score rows for blocks of users over one training graph."""

    def __init__(self, graph: BipartiteGraph, params: AlgorithmParams):
        self.graph = graph
        self.params = params

    def block(self, users: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, user: int) -> ScoreVector:
        return ScoreVector(self.block(np.array([user]))[0], self.graph.profile(user))


class PopularityScorer(Scorer):
    def block(self, users):
        deg = self.graph.object_degree.astype(np.float64)
        return np.broadcast_to(deg, (len(users), len(deg))).copy()


class CollaborativeScorer(Scorer):
    def __init__(self, graph, params):
        super().__init__(graph, params)
        k = graph.user_degree.astype(np.float64)
        self._inv_sqrt = np.zeros_like(k)
        self._inv_sqrt[k > 0] = 1.0 / np.sqrt(k[k > 0])

    def block(self, users):
        p = self.graph.profiles
        users = np.asarray(users, dtype=np.int64)
        common = (p[users] @ p.T).toarray()
        sims = common * self._inv_sqrt[users][:, None] * self._inv_sqrt[None, :]
        sims[np.arange(len(users)), users] = 0.0
        total = sims.sum(axis=1)
        num = np.asarray((p.T @ sims.T).T)
        out = np.zeros_like(num)
        ok = total > 0
        out[ok] = num[ok] / total[ok, None]
        return out


class WeightScorer(Scorer):
    def __init__(self, graph, params, weights: WeightMatrix, dense: bool | None = None):
        super().__init__(graph, params)
        self.weights = weights
        n = weights.n
        if dense is None:
            sparse_ops = float(np.dot(np.diff(weights.csc.indptr), graph.object_degree))
            dense_ops = float(graph.num_users) * n * n
            dense = n <= DENSE_MAX_OBJECTS and dense_ops <= DENSE_COST_RATIO * sparse_ops
        self.dense = dense
        # the column-major arrays of R read row-major are R^T
        c = weights.csc
        self._rt = sp.csr_matrix((c.data, c.indices, c.indptr), shape=c.shape).toarray() \
            if dense else None

    def block(self, users):
        users = np.asarray(users, dtype=np.int64)
        if self.dense:
            f = self.graph.profiles[users].toarray()
            return f @ self._rt
        w = self.weights.csc
        return kernels.propagate_rows(w.indptr, w.indices, w.data, self.graph.user_indptr,
                                      self.graph.user_objects, users, self.weights.n)


def make_scorer(params: AlgorithmParams, graph: BipartiteGraph,
                cache: DiffusionCache | None = None, dense: bool | None = None) -> Scorer:
    if params.tag == "GRM":
        return PopularityScorer(graph, params)
    if params.tag == "CF":
        return CollaborativeScorer(graph, params)
    return WeightScorer(graph, params, weights_for(params, graph, cache), dense=dense)


# -- weight cache file -------------------------------------------------------------------------

_MAGIC = "# cbirec-weights"


def save_weights(path, weights: WeightMatrix) -> None:
    """Text triplet file: one header line, then ``i<TAB>j<TAB>value`` in row-major order."""
    m = weights.matrix
    header = {"n": weights.n, "tag": weights.tag, "params": weights.params, "nnz": m.nnz}
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.indptr))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{_MAGIC} {json.dumps(header, sort_keys=True)}\n")
        for i, j, v in zip(rows.tolist(), m.indices.tolist(), m.data.tolist()):
            fh.write(f"{i}\t{j}\t{v!r}\n")


def load_weights(path) -> WeightMatrix:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        if not first.startswith(_MAGIC):
            raise DataError(f"{path}: not a weight cache file")
        header = json.loads(first[len(_MAGIC):])
        triples = np.loadtxt(fh, dtype=np.float64, ndmin=2).reshape(-1, 3)
    n = int(header["n"])
    if len(triples) != header["nnz"]:
        raise DataError(f"{path}: expected {header['nnz']} entries, found {len(triples)}")
    m = sp.csc_matrix((triples[:, 2], (triples[:, 0].astype(np.int64), triples[:, 1].astype(np.int64))),
                      shape=(n, n))
    m.sort_indices()
    return WeightMatrix(m, header["tag"], header["params"])
