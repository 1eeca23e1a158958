"""Rating-file parsing, threshold binarisation and random train/test splits."""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass
from functools import cached_property
from typing import IO, Iterable, NamedTuple

import numpy as np

from cbirec.errors import DataError
from cbirec.graph import BipartiteGraph, IdInterner, build_graph

# name -> (delimiter, has_header)
FORMATS = {
    "ml100k": ("\t", False),
    "ml1m": ("::", False),
    "tsv": ("\t", False),
    "csv": (",", True),
}


class InteractionRecord(NamedTuple):
    user: str
    item: str
    rating: float
    timestamp: int | None = None


@dataclass(frozen=True)
class DatasetStats:
    num_users: int
    num_objects: int
    num_links: int
    sparsity: float


def _lines(stream) -> Iterable[str]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    elif isinstance(stream, str):
        stream = io.StringIO(stream)
    for raw in stream:
        yield raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw


def parse_ratings(stream: IO | bytes | str, delimiter: str = "\t",
                  has_header: bool = False) -> list[InteractionRecord]:
    """Parse ``user<d>object<d>rating[<d>timestamp]`` lines.

    Blank lines are skipped.  Line numbers in error messages are 1-based and
    count the header line when there is one.
    """
    records = []
    for lineno, line in enumerate(_lines(stream), start=1):
        if has_header and lineno == 1:
            continue
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split(delimiter)
        if len(fields) < 3:
            raise DataError(f"line {lineno}: expected at least 3 fields, got {len(fields)}")
        try:
            rating = float(fields[2])
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric rating {fields[2]!r}") from None
        if not math.isfinite(rating):
            raise DataError(f"line {lineno}: rating must be finite")
        timestamp = None
        if len(fields) > 3 and fields[3].strip():
            try:
                timestamp = int(float(fields[3]))
            except ValueError:
                raise DataError(f"line {lineno}: bad timestamp {fields[3]!r}") from None
        records.append(InteractionRecord(fields[0].strip(), fields[1].strip(), rating, timestamp))
    return records


def read_ratings(path: str | os.PathLike, delimiter: str = "\t",
                 has_header: bool = False) -> list[InteractionRecord]:
    try:
        with open(path, "rb") as fh:
            return parse_ratings(fh, delimiter, has_header)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def threshold_filter(records: Iterable[InteractionRecord], min_rating: float) -> list[tuple[str, str]]:
    """Keep ``(user, object)`` for every record rated at least ``min_rating``."""
    return [(r.user, r.item) for r in records if r.rating >= min_rating]


def dedupe(links: np.ndarray) -> np.ndarray:
    """Drop repeated ``(user, object)`` rows, keeping first occurrences in order."""
    links = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    _, first = np.unique(links, axis=0, return_index=True)
    return links[np.sort(first)]


def load_links(path, delimiter="\t", has_header=False, threshold=3.0):
    """Read a rating file and return ``(interner, links)`` with deduplicated index pairs.

    Every user and object in the file is interned, including those whose
    ratings all fall below the threshold, so the graph dimensions follow the
    raw catalogue.
    """
    records = read_ratings(path, delimiter, has_header)
    interner = IdInterner()
    for r in records:
        interner.intern_user(r.user)
        interner.intern_object(r.item)
    links = interner.lookup_pairs(threshold_filter(records, threshold))
    return interner, dedupe(links)


def dataset_stats(links, num_users: int, num_objects: int) -> DatasetStats:
    k = len(np.asarray(links).reshape(-1, 2))
    cells = num_users * num_objects
    return DatasetStats(num_users, num_objects, k, k / cells if cells else 0.0)


@dataclass(frozen=True, eq=False)
class SplitDataset:
    num_users: int
    num_objects: int
    train: np.ndarray
    test: np.ndarray
    seed: int

    @cached_property
    def train_graph(self) -> BipartiteGraph:
        return build_graph(self.train, self.num_users, self.num_objects)

    @cached_property
    def test_graph(self) -> BipartiteGraph:
        return build_graph(self.test, self.num_users, self.num_objects)


def holdout_size(num_links: int, fraction: float) -> int:
    return int(math.floor(num_links * fraction + 0.5))


def split(links, test_fraction: float, seed: int,
          num_users: int | None = None, num_objects: int | None = None) -> SplitDataset:
    """Uniform per-link random partition into training and testing edges.

    Users or objects that end up with links only in the test part keep their
    index and appear in the training graph with degree zero.
    """
    links = np.asarray(links, dtype=np.int64).reshape(-1, 2)
    if len(links) == 0:
        raise DataError("cannot split an empty link set")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError(f"test fraction must lie in (0, 1), got {test_fraction}")
    if num_users is None:
        num_users = int(links[:, 0].max()) + 1
    if num_objects is None:
        num_objects = int(links[:, 1].max()) + 1

    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(links))
    n_test = holdout_size(len(links), test_fraction)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return SplitDataset(num_users, num_objects, links[train_idx], links[test_idx], int(seed))


def save_split(ds: SplitDataset, interner: IdInterner, out_dir, *,
               test_fraction: float, threshold: float) -> None:
    """Write ``train.tsv``, ``test.tsv`` (raw ids) and a ``manifest.txt``."""
    os.makedirs(out_dir, exist_ok=True)
    for name, edges in (("train", ds.train), ("test", ds.test)):
        with open(os.path.join(out_dir, f"{name}.tsv"), "w", encoding="utf-8", newline="\n") as fh:
            for u, o in edges:
                fh.write(f"{interner.user_ids[u]}\t{interner.object_ids[o]}\n")
    manifest = {
        "seed": ds.seed,
        "test_fraction": test_fraction,
        "threshold": threshold,
        "num_users": ds.num_users,
        "num_objects": ds.num_objects,
        "train_links": len(ds.train),
        "test_links": len(ds.test),
    }
    with open(os.path.join(out_dir, "manifest.txt"), "w", encoding="utf-8", newline="\n") as fh:
        for key, value in manifest.items():
            fh.write(f"{key}={value}\n")


def load_split(out_dir, interner: IdInterner | None = None) -> tuple[SplitDataset, IdInterner]:
    """Inverse of :func:`save_split`.

    Without an interner, ids are interned from the train file then the test
    file, and dimensions come from the manifest (zero-degree nodes beyond the
    interned ones keep their slots but lose their raw ids).
    """
    meta = {}
    with open(os.path.join(out_dir, "manifest.txt"), encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.strip().partition("=")
            meta[key] = value
    raw = {}
    for name in ("train", "test"):
        with open(os.path.join(out_dir, f"{name}.tsv"), encoding="utf-8") as fh:
            raw[name] = [tuple(line.rstrip("\n").split("\t")[:2]) for line in fh if line.strip()]
    if interner is None:
        interner = IdInterner()
        edges = {name: interner.intern_pairs(raw[name]) for name in ("train", "test")}
    else:
        edges = {name: interner.lookup_pairs(raw[name]) for name in ("train", "test")}
    ds = SplitDataset(
        num_users=int(meta["num_users"]),
        num_objects=int(meta["num_objects"]),
        train=edges["train"],
        test=edges["test"],
        seed=int(meta["seed"]),
    )
    return ds, interner
