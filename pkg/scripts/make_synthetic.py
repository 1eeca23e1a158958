"""Regenerate the bundled synthetic rating file.

Users and objects belong to a handful of latent taste groups; objects have
power-law popularity.  Ratings are higher inside a user's group, so a
threshold of 3 keeps mostly in-group links and the diffusion methods have
structure to find.  Output is deterministic for a given seed.

    python3 scripts/make_synthetic.py [--out src/cbirec/data/synthetic.tsv]
"""
import argparse
from pathlib import Path

import numpy as np

DEFAULT_OUT = Path(__file__).resolve().parent.parent / "src" / "cbirec" / "data" / "synthetic.tsv"


def generate(seed=2024, users=500, objects=800, groups=6, ratings=13_000):
    rng = np.random.default_rng(seed)
    ugroup = rng.integers(0, groups, users)
    ogroup = rng.integers(0, groups, objects)
    pop = rng.pareto(1.2, objects) + 1.0
    activity = rng.pareto(1.5, users) + 1.0

    seen = set()
    rows = []
    t0 = 880_000_000
    while len(rows) < ratings:
        u = int(rng.choice(users, p=activity / activity.sum()))
        same = rng.random() < 0.7
        pool = np.flatnonzero((ogroup == ugroup[u]) == same)
        w = pop[pool]
        o = int(pool[rng.choice(len(pool), p=w / w.sum())])
        if (u, o) in seen:
            continue
        seen.add((u, o))
        base = 3.8 if same else 2.4
        r = int(np.clip(np.rint(base + rng.normal(0, 1.0)), 1, 5))
        rows.append((u + 1, o + 1, r, t0 + int(rng.integers(0, 10**7))))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rows = generate(args.seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for u, o, r, t in rows:
            fh.write(f"{u}\t{o}\t{r}\t{t}\n")
    kept = sum(r >= 3 for _, _, r, _ in rows)
    print(f"wrote {len(rows)} ratings ({kept} at rating >= 3) to {args.out}")


if __name__ == "__main__":
    main()
