"""Single-pass evaluation of a scorer on one split.

Users are scored in blocks; each block feeds the AUC tally and the top-L
ranking before being discarded, so memory stays bounded by the block size.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cbirec import kernels
from cbirec.graph import BipartiteGraph
from cbirec.ingest import SplitDataset
from cbirec import metrics as M

METRICS = ("auc", "precision", "recall", "intra_similarity", "hamming", "average_degree")

SCORE_BUDGET = 1 << 22  # floats per score block


@dataclass
class Evaluation:
    auc: float | None
    by_length: dict[int, dict[str, float]] = field(default_factory=dict)
    lists: np.ndarray | None = None


def _blocks(num_users, num_objects):
    size = max(1, SCORE_BUDGET // max(num_objects, 1))
    for lo in range(0, num_users, size):
        yield np.arange(lo, min(lo + size, num_users), dtype=np.int64)


def rank_all(provider, graph: BipartiteGraph, L: int) -> np.ndarray:
    """Top-``L`` lists for every user as an ``(m, L)`` matrix padded with ``-1``."""
    out = np.full((graph.num_users, L), -1, dtype=np.int64)
    for users in _blocks(graph.num_users, graph.num_objects):
        scores = M._score_block(provider, users)
        out[users] = kernels.top_l_rows(scores, graph.user_indptr, graph.user_objects, users, L)
    return out


def check_exclusion(lists: np.ndarray, graph: BipartiteGraph) -> None:
    bad = M.hit_matrix(lists, graph).any(axis=1)
    if bad.any():
        users = np.flatnonzero(bad)
        raise RuntimeError(f"recommendation lists contain training objects for users {users[:10]}")


def _check_ranges(values: dict[str, float], max_degree: float) -> None:
    eps = 1e-9
    for name in ("auc", "precision", "recall", "hamming", "intra_similarity"):
        v = values.get(name)
        if v is not None and not (-eps <= v <= 1 + eps):
            raise RuntimeError(f"{name}={v} outside [0, 1]")
    k = values.get("average_degree")
    if k is not None and not (-eps <= k <= max_degree + eps):
        raise RuntimeError(f"average_degree={k} outside [0, {max_degree}]")


def evaluate(provider, split: SplitDataset, lengths=(50,), sample: M.AucSample | None = None,
             scope: str = "all", diversity: bool = True) -> Evaluation:
    """AUC over ``sample`` plus list metrics at each length in ``lengths``.

    Pass ``lengths=()`` for AUC only, or ``sample=None`` to skip AUC.
    """
    graph = split.train_graph
    lengths = sorted({int(L) for L in lengths})
    max_l = lengths[-1] if lengths else 0
    lists = np.full((graph.num_users, max_l), -1, dtype=np.int64) if max_l else None

    wins = ties = 0
    if sample is not None:
        bounds = np.searchsorted(sample.users, np.arange(graph.num_users + 1))
    for users in _blocks(graph.num_users, graph.num_objects):
        lo_u, hi_u = users[0], users[-1] + 1
        need_auc = sample is not None and bounds[hi_u] > bounds[lo_u]
        if not need_auc and lists is None:
            continue
        scores = M._score_block(provider, users)
        if need_auc:
            lo, hi = bounds[lo_u], bounds[hi_u]
            row = sample.users[lo:hi] - lo_u
            w, t = kernels.auc_tally_rows(scores, row, sample.relevant[lo:hi],
                                          sample.irrelevant[lo:hi])
            wins += w
            ties += t
        if lists is not None:
            lists[users] = kernels.top_l_rows(scores, graph.user_indptr, graph.user_objects,
                                              users, max_l)

    result = Evaluation(auc=(wins + 0.5 * ties) / len(sample) if sample is not None else None,
                        lists=lists)
    max_degree = float(graph.object_degree.max(initial=0))
    if lists is not None:
        check_exclusion(lists, graph)
        scope_rows = M._scope_rows(split, scope)
        hits = M.hit_matrix(lists, split.test_graph)
        for L in lengths:
            sub = lists[:, :L]
            values = {
                "precision": M.precision_from_hits(hits, scope_rows, L),
                "recall": M.recall_from_hits(hits[:, :L], len(split.test)),
            }
            if diversity:
                values["intra_similarity"] = M.intra_similarity(sub, graph, scope_rows)
                values["hamming"] = M.hamming(sub, L)
                values["average_degree"] = M.average_degree(sub, graph)
            result.by_length[L] = values
            _check_ranges(values, max_degree)
    if result.auc is not None:
        _check_ranges({"auc": result.auc}, max_degree)
    return result
