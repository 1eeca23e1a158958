"""Compare the compiled and numpy kernel backends.

Times each hot kernel on one training split (MovieLens-100k when present,
otherwise the bundled synthetic set), then optionally the whole NBI/UCBI
evaluation under each backend in a fresh interpreter.

    python3 benchmarks/bench_kernels.py [--dataset PATH] [--repeat 3] [--end-to-end]
"""
import argparse
import os
import subprocess
import sys
import timeit
from pathlib import Path

import numpy as np

from cbirec import kernels
from cbirec.algorithms import DiffusionCache
from cbirec.experiment import ExperimentConfig, Prepared, load_dataset

ROOT = Path(__file__).resolve().parent.parent
ML = ROOT / "data" / "ml-100k" / "u.data"
SYNTHETIC = ROOT / "src" / "cbirec" / "data" / "synthetic.tsv"


def kernel_cases(prep):
    g = prep.split.train_graph
    c = prep.cache
    w = c.nbi
    m, n = g.num_users, g.num_objects
    rows = np.arange(m, dtype=np.int64)
    scores = np.ascontiguousarray(kernels.propagate_rows(
        w.indptr, w.indices, w.data, g.user_indptr, g.user_objects, rows, n))
    lists = kernels.top_l_rows(scores, g.user_indptr, g.user_objects, rows, 50)
    s = prep.sample
    return {
        "nbi_columns": lambda b: kernels.nbi_columns(
            g.object_indptr, g.object_users, g.user_indptr, g.user_objects, n, backend=b),
        "propagate_rows": lambda b: kernels.propagate_rows(
            w.indptr, w.indices, w.data, g.user_indptr, g.user_objects, rows, n, backend=b),
        "top_l_rows (L=50)": lambda b: kernels.top_l_rows(
            scores, g.user_indptr, g.user_objects, rows, 50, backend=b),
        "hit_rows": lambda b: kernels.hit_rows(
            lists, prep.split.test_graph.user_indptr, prep.split.test_graph.user_objects, n,
            backend=b),
        "auc_tally_rows": lambda b: kernels.auc_tally_rows(
            scores, s.users, s.relevant, s.irrelevant, backend=b),
        "intra_similarity_rows": lambda b: kernels.intra_similarity_rows(
            lists, g.object_indptr, g.object_users, m, backend=b),
    }


END_TO_END = """
import time
from cbirec import kernels
from cbirec.algorithms import AlgorithmParams
from cbirec.experiment import ExperimentConfig, Prepared, load_dataset
cfg = ExperimentConfig(dataset={path!r}, auc_samples=10**6)
prep = Prepared.build(load_dataset(cfg), cfg, 0)
t0 = time.perf_counter()
for p in (AlgorithmParams("NBI"), AlgorithmParams("UCBI", 0.79, 0.51)):
    prep.evaluate(p, cfg)
print(kernels.BACKEND, time.perf_counter() - t0)
"""


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dataset", type=Path, default=ML if ML.is_file() else SYNTHETIC)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args()

    backends = kernels.available_backends()
    cfg = ExperimentConfig(dataset=str(args.dataset), auc_samples=10**6)
    prep = Prepared.build(load_dataset(cfg), cfg, 0)
    g = prep.split.train_graph
    print(f"dataset {args.dataset.name}: {g.num_users} users, {g.num_objects} objects, "
          f"{g.num_links} training links; backends {', '.join(backends)}")
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy backend is timed")

    print(f"{'kernel':<24}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in kernel_cases(prep).items():
        times = {b: min(timeit.repeat(lambda: fn(b), number=1, repeat=args.repeat))
                 for b in backends}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:<24}" + "".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends)
              + f"{speed:>9.1f}x")

    if args.end_to_end:
        print("\nNBI + UCBI evaluation on one split (seconds):")
        for pure in ("0", "1"):
            env = dict(os.environ, CBIREC_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", END_TO_END.format(path=str(args.dataset))],
                                 env=env, capture_output=True, text=True, check=True)
            print("  " + out.stdout.strip())


if __name__ == "__main__":
    main()
