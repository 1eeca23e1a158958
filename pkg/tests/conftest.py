import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from cbirec.graph import build_graph

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parent.parent
ML100K = Path(os.environ.get("CBIREC_ML100K", ROOT / "data" / "ml-100k" / "u.data"))


def random_edges(rng, m, n, density=0.3, cover_objects=False):
    mask = rng.random((m, n)) < density
    if cover_objects:
        # every object gets at least one user
        for o in np.flatnonzero(~mask.any(axis=0)):
            mask[rng.integers(m), o] = True
    u, o = np.nonzero(mask)
    return np.column_stack([u, o]).astype(np.int64)


def random_graph(seed, m=None, n=None, density=None, cover_objects=False):
    rng = np.random.default_rng(seed)
    m = m or int(rng.integers(1, 31))
    n = n or int(rng.integers(1, 31))
    density = density if density is not None else float(rng.uniform(0.05, 0.6))
    edges = random_edges(rng, m, n, density, cover_objects)
    return build_graph(edges, m, n), edges


@pytest.fixture
def small_graph():
    # u1 = {o1, o2}, u2 = {o2, o3} with 0-based indices
    return build_graph([(0, 0), (0, 1), (1, 1), (1, 2)], 2, 3)


@pytest.fixture(scope="session")
def ml100k_path():
    if not ML100K.is_file():
        pytest.skip(f"MovieLens-100k not found at {ML100K}; run scripts/fetch_movielens.py")
    return ML100K


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
