import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from cbirec import metrics as M
from cbirec.algorithms import AlgorithmParams, DiffusionCache, RecommendationList, make_scorer
from cbirec.errors import DataError
from cbirec.evaluation import check_exclusion, evaluate, rank_all
from cbirec.graph import build_graph
from cbirec.ingest import SplitDataset, dedupe, split


class Fixed:
    """Score provider returning a fixed (m, n) matrix."""

    def __init__(self, scores):
        self.scores = np.asarray(scores, dtype=np.float64)

    def block(self, users):
        return self.scores[users]


def make_split(m, n, train, test):
    return SplitDataset(m, n, np.array(train, dtype=np.int64).reshape(-1, 2),
                        np.array(test, dtype=np.int64).reshape(-1, 2), 0)


def random_split(seed, m=12, n=15, density=0.35):
    rng = np.random.default_rng(seed)
    mask = rng.random((m, n)) < density
    links = np.column_stack(np.nonzero(mask)).astype(np.int64)
    return split(links, 0.3, seed, m, n)


# -- AUC ----------------------------------------------------------------------------------------

def test_auc_oracle_scores_give_one():
    ds = random_split(1)
    s = np.zeros((ds.num_users, ds.num_objects))
    s[ds.test[:, 0], ds.test[:, 1]] = 1.0
    for mode in M.AUC_MODES:
        assert M.auc(Fixed(s), ds, 2000, seed=4, mode=mode) == 1.0


def test_auc_constant_scores_give_half():
    ds = random_split(2)
    assert M.auc(Fixed(np.full((ds.num_users, ds.num_objects), 3.0)), ds, 5000, 1) == 0.5


def test_auc_arithmetic():
    # 3 comparisons: one win, one tie, one loss
    sample = M.AucSample(np.array([0, 0, 0]), np.array([0, 0, 0]), np.array([1, 2, 3]))
    s = np.array([[0.6, 0.2, 0.6 * (1 + 1e-14), 0.9]])
    assert M.auc_from_sample(Fixed(s), sample) == pytest.approx(0.5)


def test_auc_irrelevant_objects_are_irrelevant():
    ds = random_split(3, m=30, n=40)
    sample = M.AucSampler(20_000, 5).draw(ds)
    tr, te = ds.train_graph, ds.test_graph
    for u, r, q in zip(sample.users[:3000], sample.relevant[:3000], sample.irrelevant[:3000]):
        assert te.has_link(u, r)
        assert not tr.has_link(u, q) and not te.has_link(u, q)
        assert 0 <= q < ds.num_objects


def test_nth_allowed_matches_enumeration():
    rng = np.random.default_rng(0)
    m, n = 6, 9
    keys = np.unique(rng.integers(0, m * n, 25))
    for u in range(m):
        allowed = [o for o in range(n) if u * n + o not in set(keys.tolist())]
        ranks = np.arange(len(allowed))
        got = M._nth_allowed(keys, m, np.full(len(ranks), u), ranks, n)
        assert got.tolist() == allowed


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("mode", M.AUC_MODES)
def test_sampled_auc_matches_exhaustive(seed, mode):
    ds = random_split(seed, m=10, n=14)
    g = ds.train_graph
    scorer = make_scorer(AlgorithmParams("NBI"), g)
    scores = scorer.block(np.arange(g.num_users))
    exact = oracles.exhaustive_auc(lambda u: scores[u].tolist(), ds.train.tolist(),
                                   ds.test.tolist(), ds.num_users, ds.num_objects, mode)
    n = 10**5
    got = M.auc(scorer, ds, n, seed=seed, mode=mode)
    assert abs(got - exact) <= 3 * math.sqrt(0.25 / n)


def test_auc_deterministic():
    ds = random_split(9, m=40, n=50)
    scorer = make_scorer(AlgorithmParams("CBI"), ds.train_graph)
    assert M.auc(scorer, ds, 10**4, 3) == M.auc(scorer, ds, 10**4, 3)


def test_auc_requires_eligible_user():
    ds = make_split(1, 2, [(0, 0)], [(0, 1)])
    with pytest.raises(DataError):
        M.AucSampler(10, 0).draw(ds)
    with pytest.raises(ValueError):
        M.AucSampler(0)


# -- list metrics -------------------------------------------------------------------------------

def test_precision_examples():
    ds = make_split(1, 60, [], [(0, 3)])
    lists = np.arange(50)[None, :]
    assert M.precision(lists, ds, 50) == pytest.approx(0.02)
    ds = make_split(2, 60, [], [(0, 0), (1, 0), (1, 1)])
    assert M.precision(np.tile(np.arange(50), (2, 1)), ds, 50) == pytest.approx(0.03)


def test_precision_scope():
    ds = make_split(4, 60, [], [(0, 3)])
    lists = np.tile(np.arange(50), (4, 1))
    assert M.precision(lists, ds, 50, scope="test") == pytest.approx(0.02)
    assert M.precision(lists, ds, 50, scope="all") == pytest.approx(0.005)
    with pytest.raises(DataError):
        M.precision(lists, make_split(4, 60, [(0, 0)], []), 50, scope="test")


def test_recall_examples():
    test = [(u, o) for u in range(4) for o in range(5)]
    ds = make_split(4, 100, [], test)
    lists = np.full((4, 10), -1)
    lists[0, :5] = np.arange(5)
    assert M.recall_global(lists, ds, 10) == pytest.approx(0.25)
    with pytest.raises(DataError):
        M.recall_global(lists, make_split(4, 100, [(0, 0)], []), 10)


def test_recall_exhaustive_list_is_one():
    ds = random_split(4)
    lists = rank_all(make_scorer(AlgorithmParams("NBI"), ds.train_graph), ds.train_graph,
                     ds.num_objects)
    assert M.recall_global(lists, ds, ds.num_objects) == 1.0


def test_hamming_examples():
    a = np.arange(50)
    assert M.hamming(np.stack([a, a]), 50) == 0.0
    assert M.hamming(np.stack([a, a + 50]), 50) == 1.0
    assert M.hamming(np.stack([a, np.r_[a[:10], np.arange(100, 140)]]), 50) == pytest.approx(0.8)
    with pytest.raises(DataError):
        M.hamming(a[None, :], 50)


@given(st.integers(0, 10**6), st.integers(1, 8))
def test_hamming_matches_pairwise(seed, L):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(2, 12)), 20
    lists = np.full((m, L), -1)
    for u in range(m):
        k = int(rng.integers(1, L + 1))
        lists[u, :k] = rng.choice(n, k, replace=False)
    want = oracles.hamming_pairs([[x for x in row if x >= 0] for row in lists], L)
    assert M.hamming(lists, L) == pytest.approx(want, abs=1e-12)


def test_intra_similarity_examples(small_graph):
    lists = np.array([[0, 1], [-1, -1]])
    assert M.intra_similarity(lists, small_graph) == pytest.approx(1 / math.sqrt(2))
    assert M.intra_similarity(np.array([[0, 2], [0, 2]]), small_graph) == 0.0
    with pytest.raises(DataError):
        M.intra_similarity(np.array([[0, -1], [1, -1]]), small_graph)


@given(st.integers(0, 10**6), st.integers(2, 8))
def test_intra_similarity_matches_pairs(seed, L):
    ds = random_split(seed % 1000, m=10, n=16)
    g = ds.train_graph
    lists = rank_all(make_scorer(AlgorithmParams("NBI"), g), g, L)
    a = oracles.dense_adjacency(ds.train.tolist(), g.num_users, g.num_objects)
    rows = [[x for x in row if x >= 0] for row in lists]
    if not any(len(r) >= 2 for r in rows):
        return
    want = oracles.intra_similarity(rows, a, g.num_users)
    got = M.intra_similarity(lists, g)
    assert got == pytest.approx(want, abs=1e-12)
    assert 0.0 <= got <= 1.0 + 1e-12


def test_average_degree_examples(small_graph):
    assert M.average_degree(np.array([[2], [-1]]), small_graph) == 1.0
    g = build_graph([(u, o) for o, k in enumerate([2, 4, 6, 8]) for u in range(k)], 8, 4)
    assert M.average_degree(np.array([[0, 1], [2, 3]]), g) == 5.0


def test_list_objects_accepted(small_graph):
    lists = [RecommendationList(0, np.array([2]), np.array([1.0])),
             RecommendationList(1, np.array([0]), np.array([1.0]))]
    assert M.average_degree(lists, small_graph) == 1.0


@given(st.integers(0, 10**6))
def test_precision_recall_identity(seed):
    ds = random_split(seed % 500)
    lists = rank_all(make_scorer(AlgorithmParams("CBI"), ds.train_graph), ds.train_graph, 5)
    hits = M.hit_matrix(lists, ds.test_graph).sum()
    assert M.precision(lists, ds, 5) * ds.num_users * 5 == pytest.approx(hits)
    assert M.recall_global(lists, ds, 5) * len(ds.test) == pytest.approx(hits)


# -- curves -------------------------------------------------------------------------------------

def test_curve_perfect_top1():
    m, n = 4, 10
    test = [(u, u) for u in range(m)]
    ds = make_split(m, n, [], test)
    s = np.zeros((m, n))
    s[np.arange(m), np.arange(m)] = 1.0
    c = M.pr_curve(Fixed(s), ds, [1])
    assert c.precision.tolist() == [1.0]
    assert c.recall.tolist() == [m / len(test)]


@given(st.integers(0, 10**6))
def test_curve_recall_monotone(seed):
    ds = random_split(seed % 500)
    provider = make_scorer(AlgorithmParams("UCBI", 0.8, 0.5), ds.train_graph)
    lengths = M.default_curve_lengths(len(ds.test), ds.num_objects)
    c = M.pr_curve(provider, ds, lengths)
    assert np.all(np.diff(c.recall) >= 0)
    lists = rank_all(provider, ds.train_graph, int(lengths[-1]))
    for L, p, r in zip(c.lengths, c.precision, c.recall):
        assert p == pytest.approx(M.precision(lists[:, :L], ds, int(L)))
        assert r == pytest.approx(M.recall_global(lists[:, :L], ds, int(L)))


def test_curve_lengths_and_csv(tmp_path):
    lengths = M.default_curve_lengths(8252, 1682)
    assert lengths[:200].tolist() == list(range(1, 201))
    assert lengths[-1] == 1682 and np.all(np.diff(lengths) > 0)
    assert M.default_curve_lengths(10_000, 5000, cap=300)[-1] == 300
    with pytest.raises(ValueError):
        M.curve_from_lists(np.zeros((1, 3), dtype=np.int64), make_split(1, 5, [], [(0, 1)]), [2, 1])
    c = M.PrCurve(np.array([1, 2]), np.array([0.5, 0.25]), np.array([0.1, 0.2]))
    c.write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text() == "L,precision,recall\n1,0.5,0.1\n2,0.25,0.2\n"


# -- evaluation pass ----------------------------------------------------------------------------

@pytest.mark.parametrize("tag", ["GRM", "CF", "NBI", "HNBI", "CBI", "UCBI"])
def test_evaluate_consistent_with_metrics(tag):
    ds = random_split(17, m=40, n=60, density=0.2)
    g = ds.train_graph
    p = AlgorithmParams(tag, alpha=0.8, beta=0.5, theta=-0.5)
    scorer = make_scorer(p, g, DiffusionCache(g))
    sample = M.AucSampler(5000, 2).draw(ds)
    ev = evaluate(scorer, ds, (3, 10), sample)
    assert ev.auc == M.auc_from_sample(scorer, sample)
    lists = rank_all(scorer, g, 10)
    assert np.array_equal(ev.lists, lists)
    check_exclusion(lists, g)
    for L in (3, 10):
        got = ev.by_length[L]
        assert got["precision"] == M.precision(lists[:, :L], ds, L)
        assert got["recall"] == M.recall_global(lists[:, :L], ds, L)
        assert got["hamming"] == M.hamming(lists[:, :L], L)
        assert got["average_degree"] == M.average_degree(lists[:, :L], g)


def test_check_exclusion_detects_leak(small_graph):
    with pytest.raises(RuntimeError):
        check_exclusion(np.array([[2, 0], [0, -1]]), small_graph)
