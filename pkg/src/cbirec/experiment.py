"""Experiment orchestration: repeated splits, parameter grids, reports and curves."""
from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy

from cbirec import __version__, kernels
from cbirec.algorithms import ALGORITHMS, AlgorithmParams, DiffusionCache, make_scorer
from cbirec.errors import ConfigError, DataError
from cbirec.evaluation import METRICS, evaluate, rank_all
from cbirec.ingest import FORMATS, dataset_stats, load_links, split
from cbirec.metrics import AUC_MODES, USER_SCOPES, AucSampler, curve_from_lists, \
    default_curve_lengths

log = logging.getLogger(__name__)

OBJECTIVES = ("auc", "precision")
COARSE_STEP = 0.05
REFINE_RADIUS = 0.05


def derive_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1)[0])


@dataclass(frozen=True)
class GridRange:
    lo: float
    hi: float
    step: float

    @classmethod
    def parse(cls, text: str) -> "GridRange":
        try:
            lo, hi, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"grid range must be lo:hi:step, got {text!r}") from None
        return cls(lo, hi, step)

    def validate(self, name):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and math.isfinite(self.step)):
            raise ConfigError(f"{name}: non-finite grid bound")
        if self.step <= 0 or self.hi < self.lo:
            raise ConfigError(f"{name}: need lo <= hi and step > 0")

    def values(self, step=None, lo=None, hi=None) -> np.ndarray:
        step = self.step if step is None else step
        # sub-ranges start on this range's own lattice
        lo = self.lo if lo is None else self.lo + step * max(0, math.ceil((lo - self.lo) / step - 1e-9))
        hi = self.hi if hi is None else min(hi, self.hi)
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(count), 10)

    def __str__(self):
        return f"{self.lo:g}:{self.hi:g}:{self.step:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str
    dataset_name: str | None = None
    format: str | None = None
    delimiter: str = "\t"
    has_header: bool = False
    threshold: float = 3.0
    test_fraction: float = 0.1
    reps: int = 10
    list_lengths: tuple[int, ...] = (50,)
    auc_samples: int = 10**6
    seed: int = 0
    algorithms: tuple[str, ...] = ALGORITHMS
    alpha: float | None = None
    beta: float | None = None
    theta: float | None = None
    grid_alpha: GridRange = GridRange(0.0, 1.5, 0.01)
    grid_beta: GridRange = GridRange(0.0, 1.5, 0.01)
    grid_theta: GridRange = GridRange(-1.5, 0.5, 0.01)
    grid_mode: str = "refine"  # "refine" (coarse then fine) or "exhaustive"
    objective: str = "auc"
    auc_mode: str = "user"
    user_scope: str = "all"
    curve_max_length: int | None = None
    out_dir: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.format is not None:
            if self.format not in FORMATS:
                raise ConfigError(f"unknown format {self.format!r}; choose from {', '.join(FORMATS)}")
            delim, header = FORMATS[self.format]
            object.__setattr__(self, "delimiter", delim)
            object.__setattr__(self, "has_header", header)
        if self.dataset_name is None:
            object.__setattr__(self, "dataset_name", os.path.basename(str(self.dataset)))
        object.__setattr__(self, "list_lengths", tuple(sorted({int(x) for x in self.list_lengths})))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    def validate(self) -> "ExperimentConfig":
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("test fraction must lie in (0, 1)")
        for name in ("reps", "auc_samples", "workers"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.list_lengths or min(self.list_lengths) < 1:
            raise ConfigError("list lengths must be positive")
        if not math.isfinite(self.threshold):
            raise ConfigError("threshold must be finite")
        for tag in self.algorithms:
            if tag not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {tag!r}; choose from {', '.join(ALGORITHMS)}")
        for name in ("grid_alpha", "grid_beta", "grid_theta"):
            getattr(self, name).validate(name)
        for name in ("alpha", "beta", "theta"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ConfigError(f"{name} must be finite")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"objective must be one of {OBJECTIVES}")
        if self.grid_mode not in ("refine", "exhaustive"):
            raise ConfigError("grid mode must be 'refine' or 'exhaustive'")
        if self.auc_mode not in AUC_MODES:
            raise ConfigError(f"AUC mode must be one of {AUC_MODES}")
        if self.user_scope not in USER_SCOPES:
            raise ConfigError(f"user scope must be one of {USER_SCOPES}")
        if self.curve_max_length is not None and self.curve_max_length < 1:
            raise ConfigError("curve max length must be positive")
        return self

    def echo(self) -> dict:
        out = asdict(self)
        for name in ("grid_alpha", "grid_beta", "grid_theta"):
            out[name] = str(getattr(self, name))
        out["list_lengths"] = list(self.list_lengths)
        out["algorithms"] = list(self.algorithms)
        return out


@dataclass
class Dataset:
    links: np.ndarray
    num_users: int
    num_objects: int

    def split(self, config: ExperimentConfig, rep: int):
        return split(self.links, config.test_fraction, derive_seed(config.seed, rep),
                     self.num_users, self.num_objects)


def load_dataset(config: ExperimentConfig) -> Dataset:
    if not os.path.isfile(config.dataset):
        raise DataError(f"dataset not found: {config.dataset}")
    interner, links = load_links(config.dataset, config.delimiter, config.has_header,
                                 config.threshold)
    if len(links) == 0:
        raise DataError(f"{config.dataset}: no links at threshold {config.threshold}")
    return Dataset(links, interner.num_users, interner.num_objects)


@dataclass
class Prepared:
    """One split with its cached diffusion matrices and AUC sample."""

    split: object
    cache: DiffusionCache
    sample: object
    rep: int

    @classmethod
    def build(cls, data: Dataset, config: ExperimentConfig, rep: int) -> "Prepared":
        ds = data.split(config, rep)
        cache = DiffusionCache(ds.train_graph)
        sampler = AucSampler(config.auc_samples, derive_seed(config.seed, rep, 1), config.auc_mode)
        return cls(ds, cache, sampler.draw(ds), rep)

    def evaluate(self, params: AlgorithmParams, config: ExperimentConfig, lengths=None,
                 auc=True, diversity=True):
        scorer = make_scorer(params, self.split.train_graph, self.cache)
        lengths = config.list_lengths if lengths is None else lengths
        return evaluate(scorer, self.split, lengths, self.sample if auc else None,
                        config.user_scope, diversity)


# -- grid search -------------------------------------------------------------------------------

@dataclass
class GridResult:
    algorithm: str
    names: tuple[str, ...]
    points: np.ndarray            # (k, d), lexicographically sorted
    values: dict[str, np.ndarray]  # objective -> (k,)
    list_length: int

    def best(self, objective: str) -> dict[str, float]:
        """Argmax point; ties go to the lexicographically smallest point."""
        i = int(np.argmax(self.values[objective]))
        return {n: float(v) for n, v in zip(self.names, self.points[i])}

    def best_value(self, objective: str) -> float:
        return float(np.max(self.values[objective]))

    def value_at(self, objective: str, **point) -> float:
        target = np.array([point[n] for n in self.names])
        hit = np.flatnonzero(np.all(np.isclose(self.points, target, atol=1e-9), axis=1))
        if len(hit) == 0:
            raise KeyError(point)
        return float(self.values[objective][hit[0]])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([*self.names, *OBJECTIVES])
            for i, p in enumerate(self.points.tolist()):
                w.writerow([*(f"{x:.2f}" for x in p),
                            *(repr(float(self.values[o][i])) for o in OBJECTIVES)])


def _grid_params(algorithm: str, point: dict) -> AlgorithmParams:
    return AlgorithmParams(algorithm, **point)


def _eval_point(prep: Prepared, config: ExperimentConfig, algorithm: str, point: dict, L: int):
    ev = prep.evaluate(_grid_params(algorithm, point), config, lengths=(L,), diversity=False)
    return ev.auc, ev.by_length[L]["precision"]


def _axes(config, algorithm):
    if algorithm == "UCBI":
        return ("alpha", "beta"), (config.grid_alpha, config.grid_beta)
    if algorithm == "HNBI":
        return ("theta",), (config.grid_theta,)
    raise ConfigError(f"grid search applies to UCBI or HNBI, not {algorithm}")


def grid_search(config: ExperimentConfig, objective: str = "auc", algorithm: str = "UCBI",
                data: Dataset | None = None, prep: Prepared | None = None) -> GridResult:
    """Evaluate AUC and precision over a parameter grid on the repetition-0 split.

    In ``refine`` mode the grid is first scanned at the coarse step, then at
    the configured step within a neighbourhood of the coarse optimum.
    """
    config.validate()
    if objective not in OBJECTIVES:
        raise ConfigError(f"objective must be one of {OBJECTIVES}")
    names, ranges = _axes(config, algorithm)
    if prep is None:
        data = data or load_dataset(config)
        prep = Prepared.build(data, config, 0)
    L = config.list_lengths[0]
    seen: dict[tuple, tuple[float, float]] = {}

    def scan(axes_values):
        mesh = np.array(np.meshgrid(*axes_values, indexing="ij")).reshape(len(names), -1).T
        todo = [tuple(p) for p in mesh.tolist() if tuple(p) not in seen]
        shared = {"prep": prep, "config": config}
        jobs = [(algorithm, names, p, L) for p in todo]
        for p, val in zip(todo, _map(config, _grid_job, jobs, shared)):
            seen[p] = val

    refine = config.grid_mode == "refine" and any(r.step < COARSE_STEP for r in ranges)
    if refine:
        # coarse points stay on the fine lattice
        scan([r.values(step=r.step * math.ceil(COARSE_STEP / r.step - 1e-9)) for r in ranges])
        best = _argmax(seen, 0 if objective == "auc" else 1)
        scan([r.values(lo=b - REFINE_RADIUS, hi=b + REFINE_RADIUS) for r, b in zip(ranges, best)])
    else:
        scan([r.values() for r in ranges])

    keys = sorted(seen)
    points = np.array(keys, dtype=np.float64).reshape(len(keys), len(names))
    vals = np.array([seen[k] for k in keys])
    return GridResult(algorithm, names, points, {"auc": vals[:, 0], "precision": vals[:, 1]}, L)


def _argmax(seen, idx):
    keys = sorted(seen)
    vals = [seen[k][idx] for k in keys]
    return keys[int(np.argmax(vals))]


def _grid_job(args):
    algorithm, names, p, L = args
    return _eval_point(_SHARED["prep"], _SHARED["config"], algorithm, dict(zip(names, p)), L)


# read-only inputs shared with pool workers through the initializer
_SHARED: dict = {}


def _init_shared(shared):
    _SHARED.clear()
    _SHARED.update(shared)


def _map(config, fn, jobs, shared):
    """Run ``fn`` over ``jobs`` serially or on a process pool; results keep job order."""
    if config.workers <= 1 or len(jobs) <= 1:
        _init_shared(shared)
        try:
            return [fn(j) for j in jobs]
        finally:
            _SHARED.clear()
    with ProcessPoolExecutor(max_workers=config.workers, initializer=_init_shared,
                             initargs=(shared,)) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))


# -- repeated-split reports --------------------------------------------------------------------

@dataclass
class MetricReport:
    dataset: str
    algorithm: str
    params: dict
    list_length: int
    runs: int
    seed: int
    mean: dict[str, float] = field(default_factory=dict)
    std: dict[str, float] = field(default_factory=dict)
    per_run: dict[str, list[float]] = field(default_factory=dict)


def resolve_params(config: ExperimentConfig, data: Dataset, prep0: Prepared | None = None,
                   grids: dict | None = None) -> list[AlgorithmParams]:
    """Fixed parameters from the config; missing UCBI/HNBI parameters come from a grid search."""
    out = []
    for tag in config.algorithms:
        if tag == "UCBI":
            if config.alpha is None or config.beta is None:
                g = grid_search(config, config.objective, "UCBI", data, prep0)
                if grids is not None:
                    grids["UCBI"] = g
                best = g.best(config.objective)
                alpha = config.alpha if config.alpha is not None else best["alpha"]
                beta = config.beta if config.beta is not None else best["beta"]
                log.info("UCBI tuned to alpha=%.2f beta=%.2f", alpha, beta)
            else:
                alpha, beta = config.alpha, config.beta
            out.append(AlgorithmParams("UCBI", alpha=alpha, beta=beta))
        elif tag == "HNBI":
            if config.theta is None:
                g = grid_search(config, config.objective, "HNBI", data, prep0)
                if grids is not None:
                    grids["HNBI"] = g
                theta = g.best(config.objective)["theta"]
                log.info("HNBI tuned to theta=%.2f", theta)
            else:
                theta = config.theta
            out.append(AlgorithmParams("HNBI", theta=theta))
        else:
            out.append(AlgorithmParams(tag))
    return out


def _rep_job(args):
    params, rep = args
    config = _SHARED["config"]
    prep = _SHARED["prep0"] if rep == 0 else Prepared.build(_SHARED["data"], config, rep)
    rows = []
    for p in params:
        ev = prep.evaluate(p, config)
        for L in config.list_lengths:
            rows.append((p.tag, L, {"auc": ev.auc, **ev.by_length[L]}))
    return rep, prep.split.seed, rows


def run_experiment(config: ExperimentConfig, data: Dataset | None = None,
                   write: bool = True) -> list[MetricReport]:
    """Evaluate every configured algorithm over ``reps`` independent splits."""
    config.validate()
    data = data or load_dataset(config)
    if not config.algorithms:
        log.warning("no algorithms selected")
        return []
    prep0 = Prepared.build(data, config, 0)
    grids: dict[str, GridResult] = {}
    params = resolve_params(config, data, prep0, grids)

    jobs = [(params, r) for r in range(config.reps)]
    shared = {"data": data, "config": config, "prep0": prep0}
    results = sorted(_map(config, _rep_job, jobs, shared), key=lambda x: x[0])

    reports = []
    for p in params:
        for L in config.list_lengths:
            rep = MetricReport(config.dataset_name, p.tag, p.relevant(), L, config.reps, config.seed)
            for name in METRICS:
                vals = [v[name] for _, _, rows in results for tag, l, v in rows
                        if tag == p.tag and l == L]
                rep.per_run[name] = vals
                rep.mean[name] = float(np.mean(vals))
                rep.std[name] = float(np.std(vals))
            reports.append(rep)

    if write:
        os.makedirs(config.out_dir, exist_ok=True)
        write_report(os.path.join(config.out_dir, "report.csv"), reports)
        write_runs(os.path.join(config.out_dir, "runs.csv"), reports,
                   [seed for _, seed, _ in results])
        for tag, g in grids.items():
            g.write_csv(os.path.join(config.out_dir, f"grid_{tag}.csv"))
        write_manifest(os.path.join(config.out_dir, "manifest.json"), config, data,
                       split_seeds=[seed for _, seed, _ in results],
                       params=[{"algorithm": p.tag, **p.relevant()} for p in params])
    return reports


REPORT_COLUMNS = ("dataset", "algorithm", "alpha", "beta", "theta", "L", "metric",
                  "mean", "std", "runs", "seed")


def _param_cells(params: dict):
    return [f"{params[k]:.2f}" if k in params else "" for k in ("alpha", "beta", "theta")]


def write_report(path, reports: list[MetricReport]) -> None:
    rows = []
    for r in reports:
        for name in METRICS:
            rows.append([r.dataset, r.algorithm, *_param_cells(r.params), r.list_length, name,
                         repr(r.mean[name]), repr(r.std[name]), r.runs, r.seed])
    order = {a: i for i, a in enumerate(ALGORITHMS)}
    rows.sort(key=lambda row: (order[row[1]], row[5], METRICS.index(row[6])))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(rows)


def read_report(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_runs(path, reports: list[MetricReport], seeds: list[int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["dataset", "algorithm", "L", "rep", "split_seed", "metric", "value"])
        for r in reports:
            for name in METRICS:
                for i, v in enumerate(r.per_run[name]):
                    w.writerow([r.dataset, r.algorithm, r.list_length, i, seeds[i], name, repr(v)])


def write_manifest(path, config, data, **extra) -> None:
    stats = dataset_stats(data.links, data.num_users, data.num_objects)
    manifest = {
        "config": config.echo(),
        "dataset_stats": asdict(stats),
        "versions": {
            "cbirec": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "kernel_backend": kernels.BACKEND,
        "workers": config.workers,
        **extra,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def format_table(reports: list[MetricReport], L: int | None = None) -> str:
    """Plain-text table in the layout of the usual results table: mean(std) per metric."""
    header = ["alg", "AUC", "P", "Recall", "I", "H", "<k>"]
    lines = ["  ".join(f"{h:>16}" for h in header)]
    for r in reports:
        if L is not None and r.list_length != L:
            continue
        cells = [r.algorithm]
        for name in METRICS:
            if name == "average_degree":
                cells.append(f"{r.mean[name]:.0f}({r.std[name]:.4f})")
            else:
                cells.append(f"{r.mean[name]:.4f}({r.std[name]:.4f})")
        lines.append("  ".join(f"{c:>16}" for c in cells))
    return "\n".join(lines)


# -- precision-recall curves -------------------------------------------------------------------

def curve_export(config: ExperimentConfig, data: Dataset | None = None) -> dict[str, str]:
    """Write ``curve_<ALG>.csv`` per algorithm from the repetition-0 split."""
    config.validate()
    if not config.algorithms:
        log.warning("no algorithms selected; no curve files written")
        return {}
    data = data or load_dataset(config)
    prep = Prepared.build(data, config, 0)
    params = resolve_params(config, data, prep)
    ds = prep.split
    lengths = default_curve_lengths(len(ds.test), ds.num_objects, config.curve_max_length)
    os.makedirs(config.out_dir, exist_ok=True)
    paths = {}
    for p in params:
        scorer = make_scorer(p, ds.train_graph, prep.cache)
        lists = rank_all(scorer, ds.train_graph, int(lengths[-1]))
        curve = curve_from_lists(lists, ds, lengths, config.user_scope)
        path = os.path.join(config.out_dir, f"curve_{p.tag}.csv")
        curve.write_csv(path)
        paths[p.tag] = path
    return paths
