import numpy as np
import pytest
from hypothesis import given, strategies as st

from cbirec.errors import DataError
from cbirec.graph import IdInterner, build_graph, profile_vector

from conftest import random_graph


def test_degrees_small(small_graph):
    g = small_graph
    assert g.object_degree.tolist() == [1, 2, 1]
    assert g.user_degree.tolist() == [2, 2]
    assert g.num_links == 4


def test_empty_graph():
    g = build_graph([], 3, 4)
    assert g.num_links == 0
    assert g.user_degree.tolist() == [0, 0, 0]
    assert g.object_degree.tolist() == [0, 0, 0, 0]


def test_duplicates_collapse():
    g = build_graph([(0, 0), (0, 0)], 1, 1)
    assert g.num_links == 1
    assert g.user_degree[0] == 1 and g.object_degree[0] == 1


def test_out_of_range_reports_position():
    with pytest.raises(DataError, match="record 2"):
        build_graph([(0, 0), (1, 1), (0, 5)], 2, 3)
    with pytest.raises(DataError, match="record 0"):
        build_graph([(-1, 0)], 2, 3)


def test_profile_vectors(small_graph):
    assert profile_vector(small_graph, 0).indices.tolist() == [0, 1]
    assert profile_vector(small_graph, 1).indices.tolist() == [1, 2]
    f = profile_vector(small_graph, 0).toarray()
    assert f.tolist() == [1.0, 1.0, 0.0]


def test_empty_profile():
    g = build_graph([(0, 0)], 2, 2)
    assert len(profile_vector(g, 1)) == 0
    with pytest.raises(IndexError):
        profile_vector(g, 2)


def test_arrays_read_only(small_graph):
    with pytest.raises(ValueError):
        small_graph.user_objects[0] = 2


def test_transpose_consistency_random_pairs():
    rng = np.random.default_rng(7)
    for seed in range(20):
        g, _ = random_graph(seed)
        for _ in range(50):
            u = int(rng.integers(g.num_users))
            o = int(rng.integers(g.num_objects))
            assert (o in g.profile(u)) == (u in g.audience(o))


@given(st.integers(0, 10_000))
def test_degree_identity_and_sorted(seed):
    g, _ = random_graph(seed)
    assert g.user_degree.sum() == g.object_degree.sum() == g.num_links
    for u in range(g.num_users):
        p = g.profile(u)
        assert np.all(np.diff(p) > 0)
    for o in range(g.num_objects):
        assert np.all(np.diff(g.audience(o)) > 0)


@given(st.integers(0, 10_000))
def test_rebuild_from_edges(seed):
    g, edges = random_graph(seed)
    again = build_graph(g.edges(), g.num_users, g.num_objects)
    assert again == g
    shuffled = np.random.default_rng(seed).permutation(edges)
    assert build_graph(np.concatenate([shuffled, shuffled]), g.num_users, g.num_objects) == g


def test_adjacency_views(small_graph):
    a = small_graph.adjacency.toarray()
    assert a.shape == (3, 2)
    assert np.array_equal(a, small_graph.profiles.toarray().T)


def test_interner_dense_and_bijective():
    it = IdInterner()
    idx = it.intern_pairs([("a", "x"), ("b", "x"), ("a", "y")])
    assert idx.tolist() == [[0, 0], [1, 0], [0, 1]]
    assert it.user_ids == ["a", "b"] and it.object_ids == ["x", "y"]
    assert all(it.user_index[r] == i for i, r in enumerate(it.user_ids))
    with pytest.raises(DataError):
        it.lookup_pairs([("zz", "x")])
