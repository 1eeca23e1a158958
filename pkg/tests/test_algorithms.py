import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from cbirec.algorithms import (AlgorithmParams, DiffusionCache, ScoreVector, WeightScorer,
                               cbi_weights, cf_scores, grm_scores, hnbi_weights, load_weights,
                               make_scorer, nbi_weights, propagate, save_weights, top_l,
                               ucbi_weights, user_similarities)
from cbirec.errors import ConfigError
from cbirec.graph import build_graph, profile_vector

from conftest import random_graph

ORACLE_GRAPHS = 200


# -- worked examples on u1 = {o1, o2}, u2 = {o2, o3} ------------------------------------------

def test_nbi_small(small_graph):
    w = nbi_weights(small_graph)
    assert w.get(1, 0) == 0.5
    assert w.get(0, 1) == 0.25
    assert w.get(1, 1) == 0.5
    assert w.get(2, 1) == 0.25
    assert w.get(1, 2) == 0.5
    assert w.get(2, 0) == 0.0 and w.get(0, 2) == 0.0


def test_nbi_single_link():
    w = nbi_weights(build_graph([(0, 0)], 1, 1))
    assert w.toarray().tolist() == [[1.0]]


def test_hnbi_small(small_graph):
    assert hnbi_weights(small_graph, 1.0).get(2, 1) == 0.5
    assert hnbi_weights(small_graph, -1.0).get(2, 1) == 0.125


def test_cbi_small(small_graph):
    r = cbi_weights(small_graph)
    assert r.get(2, 1) == pytest.approx(0.75)
    assert r.get(2, 0) == 0.0


def test_ucbi_small(small_graph):
    assert ucbi_weights(small_graph, 0.5, 1.0).get(2, 1) == pytest.approx(1.0)
    # no link either way: stays absent for any exponents, including non-positive ones
    for a, b in [(0.0, 0.0), (-1.0, 0.5), (1.3, -0.2)]:
        assert ucbi_weights(small_graph, a, b).get(2, 0) == 0.0


def test_propagate_small(small_graph):
    f = profile_vector(small_graph, 0)
    assert propagate(nbi_weights(small_graph), f).values[2] == pytest.approx(0.25)
    assert propagate(cbi_weights(small_graph), f).values[2] == pytest.approx(0.75)
    empty = profile_vector(build_graph([(0, 0)], 2, 3), 1)
    assert not propagate(nbi_weights(small_graph), empty).values.any()


def test_grm_small(small_graph):
    s = grm_scores(small_graph, 0)
    lst = top_l(s, small_graph, 0, 50)
    assert lst.objects.tolist() == [2] and lst.scores.tolist() == [1.0]
    g = build_graph([], 2, 3)
    assert not grm_scores(g, 0).values.any()


def test_grm_excludes_popular_collected():
    g = build_graph([(0, 0), (1, 0), (2, 0), (0, 1)], 3, 3)
    lst = top_l(grm_scores(g, 0), g, 0, 3)
    assert 0 not in lst.objects


def test_cf_small(small_graph):
    assert user_similarities(small_graph, 0)[1] == pytest.approx(0.5)
    assert cf_scores(small_graph, 0).values[2] == pytest.approx(1.0)


def test_cf_isolated_and_identical_users():
    g = build_graph([(0, 0), (1, 1)], 2, 2)
    assert not cf_scores(g, 0).values.any()
    g = build_graph([(0, 0), (0, 1), (1, 0), (1, 1)], 2, 3)
    assert user_similarities(g, 0)[1] == pytest.approx(1.0)


def test_top_l_contract(small_graph):
    s = ScoreVector(np.array([0.0, 0.0, 0.25]), small_graph.profile(0))
    assert top_l(s, small_graph, 0, 50).objects.tolist() == [2]
    g = build_graph([(0, 3)], 1, 4)
    zero = ScoreVector(np.zeros(4), g.profile(0))
    assert top_l(zero, g, 0, 2).objects.tolist() == [0, 1]
    assert top_l(zero, g, 0, 10).objects.tolist() == [0, 1, 2]
    with pytest.raises(ValueError):
        top_l(zero, g, 0, 0)


def test_params_validation():
    with pytest.raises(ConfigError):
        AlgorithmParams("PAGERANK")
    with pytest.raises(ConfigError):
        AlgorithmParams("UCBI", alpha=float("nan"))
    assert AlgorithmParams("NBI", alpha=3).relevant() == {}
    assert AlgorithmParams("UCBI", 0.7, 0.3).relevant() == {"alpha": 0.7, "beta": 0.3}


# -- invariants ---------------------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(200))
def test_column_stochastic(seed):
    g, _ = random_graph(seed, cover_objects=True)
    cache = DiffusionCache(g)
    w = nbi_weights(g, cache).toarray()
    assert np.all(np.abs(w.sum(axis=0) - 1.0) <= 1e-12)
    assert np.all(np.abs(cache.column_sums - 1.0) <= 1e-12)
    assert np.all(np.abs(cbi_weights(g, cache).toarray() - (w + w.T)) <= 1e-12)


@given(st.integers(0, 10**6))
def test_zero_degree_columns_empty(seed):
    g, _ = random_graph(seed)
    w = nbi_weights(g).toarray()
    assert not w[:, g.object_degree == 0].any()


@given(st.integers(0, 10**6))
def test_exact_reductions(seed):
    g, _ = random_graph(seed)
    cache = DiffusionCache(g)
    assert ucbi_weights(g, 1.0, 1.0, cache).same_as(cbi_weights(g, cache))
    assert hnbi_weights(g, 0.0, cache).same_as(nbi_weights(g, cache))
    assert ucbi_weights(g, 1, 1).same_as(cbi_weights(g))


@given(st.integers(0, 10**6))
def test_mass_conservation(seed):
    g, _ = random_graph(seed, cover_objects=True)
    w = nbi_weights(g)
    for u in range(g.num_users):
        f = propagate(w, profile_vector(g, u))
        assert abs(f.values.sum() - g.user_degree[u]) <= 1e-9


@given(st.integers(0, 10**6),
       st.floats(0.0, 1.5), st.floats(0.0, 1.5), st.floats(-1.5, 0.5))
def test_nonnegative(seed, alpha, beta, theta):
    g, _ = random_graph(seed)
    cache = DiffusionCache(g)
    for p in (AlgorithmParams("UCBI", alpha, beta), AlgorithmParams("HNBI", theta=theta)):
        scorer = make_scorer(p, g, cache)
        w = scorer.weights.matrix
        assert np.all(np.isfinite(w.data)) and np.all(w.data >= 0)
        assert np.all(scorer.block(np.arange(g.num_users)) >= 0)


@given(st.integers(0, 10**6))
def test_structure_only_on_shared_users(seed):
    g, _ = random_graph(seed)
    a = g.adjacency.toarray()
    shares = (a @ a.T) > 0
    for w in (nbi_weights(g), cbi_weights(g), ucbi_weights(g, 0.3, -0.4)):
        present = w.toarray() != 0
        assert not (present & ~shares).any()


# -- dense oracle -------------------------------------------------------------------------------

def _oracle_case(seed):
    rng = np.random.default_rng(seed + 10_000)
    g, edges = random_graph(seed)
    m, n = g.num_users, g.num_objects
    a = oracles.dense_adjacency(edges.tolist(), m, n)
    alpha, beta = (float(x) for x in rng.uniform(0, 1.5, 2))
    theta = float(rng.uniform(-1.5, 0.5))
    return g, a, m, n, alpha, beta, theta


@pytest.mark.parametrize("seed", range(ORACLE_GRAPHS))
def test_weights_match_dense_oracle(seed):
    g, a, m, n, alpha, beta, theta = _oracle_case(seed)
    cache = DiffusionCache(g)
    pairs = [
        (nbi_weights(g, cache), oracles.nbi(a, m, n)),
        (hnbi_weights(g, theta, cache), oracles.hnbi(a, m, n, theta)),
        (cbi_weights(g, cache), oracles.cbi(a, m, n)),
        (ucbi_weights(g, alpha, beta, cache), oracles.ucbi(a, m, n, alpha, beta)),
    ]
    for got, want in pairs:
        assert np.max(np.abs(got.toarray() - np.array(want)), initial=0) <= 1e-10


@pytest.mark.parametrize("seed", range(ORACLE_GRAPHS))
def test_scores_match_dense_oracle(seed):
    g, a, m, n, alpha, beta, theta = _oracle_case(seed)
    cache = DiffusionCache(g)
    users = np.arange(m)
    want = {
        "GRM": [oracles.grm(a, m, n)] * m,
        "CF": [oracles.cf(a, m, n, u) for u in range(m)],
        "NBI": [oracles.propagate(oracles.nbi(a, m, n), a, u, n) for u in range(m)],
        "HNBI": [oracles.propagate(oracles.hnbi(a, m, n, theta), a, u, n) for u in range(m)],
        "CBI": [oracles.propagate(oracles.cbi(a, m, n), a, u, n) for u in range(m)],
        "UCBI": [oracles.propagate(oracles.ucbi(a, m, n, alpha, beta), a, u, n) for u in range(m)],
    }
    for tag, rows in want.items():
        params = AlgorithmParams(tag, alpha=alpha, beta=beta, theta=theta)
        for dense in (True, False):
            got = make_scorer(params, g, cache, dense=dense).block(users)
            assert np.max(np.abs(got - np.array(rows)), initial=0) <= 1e-10, (tag, dense)
        # single-user path and ranking
        u = seed % m
        sv = make_scorer(params, g, cache)(u)
        lst = top_l(sv, g, u, 5)
        assert lst.objects.tolist() == oracles.ranking(sv.values, set(g.profile(u).tolist()), 5)


def test_single_user_functions_match_batch():
    g, _ = random_graph(5, m=20, n=25, density=0.3)
    cache = DiffusionCache(g)
    cf = make_scorer(AlgorithmParams("CF"), g, cache).block(np.arange(g.num_users))
    for u in range(g.num_users):
        assert np.allclose(cf_scores(g, u).values, cf[u], atol=1e-12)


def test_weight_cache_round_trip(tmp_path):
    g, _ = random_graph(11, m=25, n=25, density=0.3)
    w = ucbi_weights(g, 0.79, 0.51)
    save_weights(tmp_path / "w.txt", w)
    back = load_weights(tmp_path / "w.txt")
    assert back.same_as(w) and back.tag == "UCBI" and back.params == {"alpha": 0.79, "beta": 0.51}
    users = np.arange(g.num_users)
    p = AlgorithmParams("UCBI", 0.79, 0.51)
    assert np.array_equal(WeightScorer(g, p, back).block(users), WeightScorer(g, p, w).block(users))
