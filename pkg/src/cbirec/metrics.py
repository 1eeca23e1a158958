"""Accuracy, diversity and novelty metrics for top-L recommendation.

Recommendation lists are handled as an ``(m, L)`` int64 matrix whose row ``u``
holds user ``u``'s ranked objects, padded with ``-1``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np

from cbirec import kernels
from cbirec.errors import DataError
from cbirec.graph import BipartiteGraph
from cbirec.ingest import SplitDataset

log = logging.getLogger(__name__)

AUC_MODES = ("user", "link")
USER_SCOPES = ("all", "test")


def as_list_matrix(lists, num_users: int | None = None) -> np.ndarray:
    """Accept an ``(m, L)`` matrix or a sequence of RecommendationList objects."""
    if isinstance(lists, np.ndarray):
        return lists
    lists = list(lists)
    if num_users is None:
        num_users = max((r.user for r in lists), default=-1) + 1
    width = max((len(r.objects) for r in lists), default=0)
    out = np.full((num_users, max(width, 1)), -1, dtype=np.int64)
    for r in lists:
        out[r.user, :len(r.objects)] = r.objects
    return out


# -- AUC ---------------------------------------------------------------------------------------

@dataclass(frozen=True)
class AucSample:
    """Comparison triples, sorted by user."""

    users: np.ndarray
    relevant: np.ndarray
    irrelevant: np.ndarray

    def __len__(self):
        return len(self.users)


class AucSampler:
    """Draws ``n`` (user, relevant, irrelevant) comparisons for a split.

    ``mode="user"`` picks a user uniformly among those with a test link and
    at least one irrelevant object, then one of that user's test links;
    ``mode="link"`` picks a test link uniformly.  The irrelevant object is
    uniform over objects the user has in neither the training nor the test
    set.
    """

    def __init__(self, n: int = 10**6, seed: int = 0, mode: str = "user"):
        if n < 1:
            raise ValueError("sample count must be >= 1")
        if mode not in AUC_MODES:
            raise ValueError(f"AUC mode must be one of {AUC_MODES}")
        self.n = int(n)
        self.seed = seed
        self.mode = mode

    def draw(self, split: SplitDataset) -> AucSample:
        train, test = split.train_graph, split.test_graph
        n_obj = split.num_objects
        rng = np.random.default_rng(self.seed)

        t_deg = test.user_degree
        forbidden = _forbidden_keys(train, test, n_obj)
        n_irr = n_obj - np.bincount(forbidden // n_obj, minlength=split.num_users)
        has_test = t_deg > 0
        starved = has_test & (n_irr < 1)
        if starved.any():
            log.warning("AUC: %d users have no irrelevant objects; their test links are skipped",
                        int(starved.sum()))
        eligible = np.flatnonzero(has_test & (n_irr >= 1))
        if len(eligible) == 0:
            raise DataError("AUC needs a user with both a test link and an irrelevant object")

        if self.mode == "user":
            users = eligible[rng.integers(0, len(eligible), size=self.n)]
        else:
            weights = np.zeros(split.num_users, dtype=np.int64)
            weights[eligible] = t_deg[eligible]
            cum = np.cumsum(weights)
            users = np.searchsorted(cum, rng.integers(0, cum[-1], size=self.n), side="right")
        users = np.sort(users)
        offs = rng.integers(0, t_deg[users])
        relevant = test.user_objects[test.user_indptr[users] + offs]
        irrelevant = _nth_allowed(forbidden, split.num_users, users,
                                  rng.integers(0, n_irr[users]), n_obj)
        return AucSample(users, relevant, irrelevant)


def _forbidden_keys(train: BipartiteGraph, test: BipartiteGraph, n_obj) -> np.ndarray:
    edges = np.concatenate([train.edges(), test.edges()])
    return np.unique(edges[:, 0] * n_obj + edges[:, 1])


def _nth_allowed(keys, m, users, ranks, n_obj):
    """The ``ranks``-th object (0-based) whose key is absent from the user's sorted ``keys``."""
    fu, fo = np.divmod(keys, n_obj)
    starts = np.searchsorted(fu, np.arange(m + 1))
    # within a user, g_k = f_k - k is non-decreasing; the r-th allowed object is
    # r + #{k : g_k <= r}
    g = fo - (np.arange(len(fo)) - starts[fu])
    gkey = fu * (n_obj + 1) + g
    count = np.searchsorted(gkey, users * (n_obj + 1) + ranks, side="right") - starts[users]
    return ranks + count


def auc_from_sample(provider, sample: AucSample) -> float:
    """AUC ``(wins + 0.5 ties) / n`` over pre-drawn comparisons."""
    wins = ties = 0
    uniq, first = np.unique(sample.users, return_index=True)
    bounds = list(first) + [len(sample)]
    for block in _chunks(uniq, _block_size(provider)):
        scores = _score_block(provider, block)
        lo = bounds[int(np.searchsorted(uniq, block[0]))]
        hi = bounds[int(np.searchsorted(uniq, block[-1])) + 1]
        row = np.searchsorted(block, sample.users[lo:hi])
        w, t = kernels.auc_tally_rows(scores, row, sample.relevant[lo:hi],
                                      sample.irrelevant[lo:hi])
        wins += w
        ties += t
    return (wins + 0.5 * ties) / len(sample)


def auc(provider, split: SplitDataset, n: int = 10**6, seed: int = 0, mode: str = "user") -> float:
    return auc_from_sample(provider, AucSampler(n, seed, mode).draw(split))


def _score_block(provider, users):
    if hasattr(provider, "block"):
        return provider.block(users)
    return np.vstack([provider(int(u)).values for u in users])


def _block_size(provider, budget=1 << 22):
    graph = getattr(provider, "graph", None)
    n = graph.num_objects if graph is not None else 1024
    return max(1, budget // max(n, 1))


def _chunks(arr, size):
    for i in range(0, len(arr), size):
        yield arr[i:i + size]


# -- list metrics ------------------------------------------------------------------------------

def hit_matrix(lists: np.ndarray, test: BipartiteGraph) -> np.ndarray:
    """Boolean ``(m, L)``: slot holds one of the row user's objects in ``test``."""
    return kernels.hit_rows(lists, test.user_indptr, test.user_objects, test.num_objects)


def _scope_rows(split: SplitDataset, scope: str) -> np.ndarray:
    if scope not in USER_SCOPES:
        raise ValueError(f"user scope must be one of {USER_SCOPES}")
    if scope == "all":
        return np.arange(split.num_users)
    return np.flatnonzero(split.test_graph.user_degree > 0)


def precision(lists, split: SplitDataset, L: int, scope: str = "all") -> float:
    """Mean of ``R_i(L) / L`` over all users (``scope="all"``) or users with test links."""
    lists = as_list_matrix(lists, split.num_users)
    return precision_from_hits(hit_matrix(lists[:, :L], split.test_graph),
                               _scope_rows(split, scope), L)


def recall_global(lists, split: SplitDataset, L: int) -> float:
    """Fraction of all test links recovered by the top-``L`` lists."""
    lists = as_list_matrix(lists, split.num_users)
    return recall_from_hits(hit_matrix(lists[:, :L], split.test_graph), len(split.test))


def precision_from_hits(hits: np.ndarray, rows: np.ndarray, L: int) -> float:
    if len(rows) == 0:
        raise DataError("precision: no eligible users")
    return float(hits[rows, :L].sum() / (len(rows) * L))


def recall_from_hits(hits: np.ndarray, num_test: int) -> float:
    if num_test == 0:
        raise DataError("recall: empty test set")
    return float(hits.sum() / num_test)


def hamming(lists, L: int) -> float:
    """Mean ``1 - Q_ij / L`` over ordered pairs of users holding non-empty lists."""
    lists = as_list_matrix(lists)[:, :L]
    rows = lists[(lists >= 0).any(axis=1)]
    m = len(rows)
    if m < 2:
        raise DataError("hamming: need at least two non-empty lists")
    items = rows[rows >= 0]
    c = np.bincount(items).astype(np.float64)
    overlap = float(np.sum(c * (c - 1.0)))
    return 1.0 - overlap / (L * m * (m - 1.0))


def intra_similarity_per_user(lists, graph: BipartiteGraph) -> np.ndarray:
    """Per-row mean pairwise object similarity; NaN where a list has fewer than 2 items."""
    lists = as_list_matrix(lists, graph.num_users)
    return kernels.intra_similarity_rows(lists, graph.object_indptr, graph.object_users,
                                         graph.num_users)


def intra_similarity(lists, graph: BipartiteGraph, users=None) -> float:
    per_user = intra_similarity_per_user(lists, graph)
    if users is not None:
        per_user = per_user[users]
    per_user = per_user[~np.isnan(per_user)]
    if len(per_user) == 0:
        raise DataError("intra-similarity: no list with two or more items")
    return float(per_user.mean())


def average_degree(lists, graph: BipartiteGraph) -> float:
    lists = as_list_matrix(lists, graph.num_users)
    filled = lists[lists >= 0]
    if len(filled) == 0:
        return 0.0
    return float(graph.object_degree[filled].mean())


# -- precision-recall curve --------------------------------------------------------------------

@dataclass(frozen=True)
class PrCurve:
    lengths: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["L", "precision", "recall"])
            for L, p, r in zip(self.lengths.tolist(), self.precision.tolist(), self.recall.tolist()):
                w.writerow([L, repr(p), repr(r)])


def curve_from_lists(lists: np.ndarray, split: SplitDataset, lengths, scope="all") -> PrCurve:
    lengths = np.asarray(lengths, dtype=np.int64)
    if len(lengths) == 0 or np.any(np.diff(lengths) <= 0) or lengths[0] < 1:
        raise ValueError("L values must be positive and strictly ascending")
    rows = _scope_rows(split, scope)
    if len(rows) == 0:
        raise DataError("precision: no eligible users")
    if len(split.test) == 0:
        raise DataError("recall: empty test set")
    hits = hit_matrix(lists[:, :lengths[-1]], split.test_graph)
    cum = np.cumsum(hits.sum(axis=0))
    cum_rows = np.cumsum(hits[rows].sum(axis=0))
    idx = np.minimum(lengths, hits.shape[1]) - 1
    prec = cum_rows[idx] / (len(rows) * lengths)
    rec = cum[idx] / len(split.test)
    return PrCurve(lengths, prec.astype(np.float64), rec.astype(np.float64))


def pr_curve(provider, split: SplitDataset, lengths, scope: str = "all") -> PrCurve:
    """Precision and recall at each ``L`` from a single ranking pass at ``max(lengths)``."""
    from cbirec.evaluation import rank_all

    lengths = np.asarray(lengths, dtype=np.int64)
    lists = rank_all(provider, split.train_graph, int(lengths.max()))
    return curve_from_lists(lists, split, lengths, scope)


def default_curve_lengths(num_test: int, num_objects: int, cap: int | None = None,
                          linear_upto: int = 200, points: int = 60) -> np.ndarray:
    """``1..200`` then geometric spacing up to ``min(|E^P|, n)`` (or ``cap``)."""
    top = min(num_test, num_objects)
    if cap is not None:
        top = min(top, cap)
    top = max(top, 1)
    lin = np.arange(1, min(top, linear_upto) + 1)
    if top <= linear_upto:
        return lin
    geo = np.unique(np.round(np.geomspace(linear_upto, top, points)).astype(np.int64))
    return np.unique(np.concatenate([lin, geo, [top]]))
