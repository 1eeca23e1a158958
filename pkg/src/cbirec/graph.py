"""Immutable user-object bipartite graph.

Objects are rows and users are columns of the adjacency matrix ``A``
(``a[i, l] = 1`` when user ``l`` collected object ``i``).  Both directions are
stored as CSR-style ``(indptr, indices)`` pairs with sorted indices, so the
profile of a user and the audience of an object are contiguous slices.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from cbirec.errors import DataError


class IdInterner:
    """Bidirectional raw-id <-> dense index map, kept separately for users and objects.

    Indices are handed out in order of first appearance, so interning the same
    stream twice yields the same mapping.
    """

    def __init__(self):
        self.user_index: dict[str, int] = {}
        self.object_index: dict[str, int] = {}
        self.user_ids: list[str] = []
        self.object_ids: list[str] = []

    @property
    def num_users(self) -> int:
        return len(self.user_ids)

    @property
    def num_objects(self) -> int:
        return len(self.object_ids)

    def intern_user(self, raw: str) -> int:
        idx = self.user_index.get(raw)
        if idx is None:
            idx = self.user_index[raw] = len(self.user_ids)
            self.user_ids.append(raw)
        return idx

    def intern_object(self, raw: str) -> int:
        idx = self.object_index.get(raw)
        if idx is None:
            idx = self.object_index[raw] = len(self.object_ids)
            self.object_ids.append(raw)
        return idx

    def intern_pairs(self, pairs: Iterable[tuple[str, str]]) -> np.ndarray:
        """Intern ``(user, object)`` raw pairs, returning a ``(k, 2)`` int64 array."""
        out = [(self.intern_user(u), self.intern_object(o)) for u, o in pairs]
        return np.asarray(out, dtype=np.int64).reshape(-1, 2)

    def lookup_pairs(self, pairs: Iterable[tuple[str, str]]) -> np.ndarray:
        """Map raw pairs through an existing interner; unknown ids raise :class:`DataError`."""
        out = []
        for pos, (u, o) in enumerate(pairs):
            try:
                out.append((self.user_index[u], self.object_index[o]))
            except KeyError as exc:
                raise DataError(f"record {pos}: unknown id {exc.args[0]!r}") from None
        return np.asarray(out, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class ProfileVector:
    """Sparse 0/1 indicator over objects; ``indices`` holds the sorted support."""

    indices: np.ndarray
    size: int

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.size)
        out[self.indices] = 1.0
        return out

    def __len__(self) -> int:
        return len(self.indices)


@dataclass(frozen=True, eq=False)
class BipartiteGraph:
    num_users: int
    num_objects: int
    # user-major: objects collected by each user
    user_indptr: np.ndarray
    user_objects: np.ndarray
    # object-major: users who collected each object
    object_indptr: np.ndarray
    object_users: np.ndarray
    user_degree: np.ndarray = field(repr=False)
    object_degree: np.ndarray = field(repr=False)

    @property
    def num_links(self) -> int:
        return int(self.user_objects.shape[0])

    def profile(self, user: int) -> np.ndarray:
        return self.user_objects[self.user_indptr[user]:self.user_indptr[user + 1]]

    def audience(self, obj: int) -> np.ndarray:
        return self.object_users[self.object_indptr[obj]:self.object_indptr[obj + 1]]

    def has_link(self, user: int, obj: int) -> bool:
        prof = self.profile(user)
        pos = np.searchsorted(prof, obj)
        return bool(pos < len(prof) and prof[pos] == obj)

    def edges(self) -> np.ndarray:
        """``(k, 2)`` array of ``(user, object)`` pairs in user-major order."""
        users = np.repeat(np.arange(self.num_users, dtype=np.int64), self.user_degree)
        return np.column_stack([users, self.user_objects])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Object x user 0/1 matrix ``A`` as float64 CSR."""
        data = np.ones(self.num_links)
        return sp.csr_matrix(
            (data, self.object_users, self.object_indptr),
            shape=(self.num_objects, self.num_users),
        )

    @cached_property
    def profiles(self) -> sp.csr_matrix:
        """User x object 0/1 matrix ``A^T`` as float64 CSR."""
        data = np.ones(self.num_links)
        return sp.csr_matrix(
            (data, self.user_objects, self.user_indptr),
            shape=(self.num_users, self.num_objects),
        )

    def __eq__(self, other):
        if not isinstance(other, BipartiteGraph):
            return NotImplemented
        return (
            self.num_users == other.num_users
            and self.num_objects == other.num_objects
            and np.array_equal(self.user_indptr, other.user_indptr)
            and np.array_equal(self.user_objects, other.user_objects)
            and np.array_equal(self.object_indptr, other.object_indptr)
            and np.array_equal(self.object_users, other.object_users)
        )

    __hash__ = None


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def build_graph(interactions, num_users: int, num_objects: int) -> BipartiteGraph:
    """Build a graph from ``(user, object)`` index pairs; duplicates collapse to one link."""
    pairs = np.asarray(interactions, dtype=np.int64).reshape(-1, 2)
    users, objects = pairs[:, 0], pairs[:, 1]
    bad = (users < 0) | (users >= num_users) | (objects < 0) | (objects >= num_objects)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise DataError(
            f"record {pos}: ({users[pos]}, {objects[pos]}) outside "
            f"[0, {num_users}) x [0, {num_objects})"
        )

    keys = np.unique(users * num_objects + objects)
    users, objects = np.divmod(keys, num_objects)
    user_degree = np.bincount(users, minlength=num_users).astype(np.int64)
    user_indptr = np.zeros(num_users + 1, dtype=np.int64)
    np.cumsum(user_degree, out=user_indptr[1:])

    order = np.lexsort((users, objects))
    object_degree = np.bincount(objects, minlength=num_objects).astype(np.int64)
    object_indptr = np.zeros(num_objects + 1, dtype=np.int64)
    np.cumsum(object_degree, out=object_indptr[1:])

    return BipartiteGraph(
        num_users=int(num_users),
        num_objects=int(num_objects),
        user_indptr=_frozen(user_indptr),
        user_objects=_frozen(np.ascontiguousarray(objects)),
        object_indptr=_frozen(object_indptr),
        object_users=_frozen(np.ascontiguousarray(users[order])),
        user_degree=_frozen(user_degree),
        object_degree=_frozen(object_degree),
    )


def profile_vector(graph: BipartiteGraph, user: int) -> ProfileVector:
    if not 0 <= user < graph.num_users:
        raise IndexError(f"user {user} outside [0, {graph.num_users})")
    return ProfileVector(indices=graph.profile(user), size=graph.num_objects)
