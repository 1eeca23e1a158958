"""Fetch MovieLens-100k ``u.data`` into ``data/ml-100k/``.

Tries the GroupLens archive first.  When that host is unreachable, falls back
to the copy of the same ratings bundled in the RecBole 1.2.1 wheel (fetched
with ``pip download``), whose ``ml-100k.inter`` file is ``u.data`` plus a
typed header line.  Either way the result is checked against the known
md5 and row count.

    python3 scripts/fetch_movielens.py [--out data/ml-100k/u.data]
"""
import argparse
import hashlib
import io
import subprocess
import sys
import tempfile
import urllib.request
import zipfile
from pathlib import Path

URL = "https://files.grouplens.org/datasets/movielens/ml-100k.zip"
MD5 = "6e47046882bad158b0efbb84cd5cb987"
ROWS = 100_000
DEFAULT_OUT = Path(__file__).resolve().parent.parent / "data" / "ml-100k" / "u.data"


def from_grouplens(timeout=30) -> bytes:
    with urllib.request.urlopen(URL, timeout=timeout) as resp:
        archive = zipfile.ZipFile(io.BytesIO(resp.read()))
    return archive.read("ml-100k/u.data")


def from_recbole() -> bytes:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "recbole==1.2.1", "--no-deps",
                        "--only-binary=:all:", "-d", tmp, "-q"], check=True)
        wheel = next(Path(tmp).glob("recbole-*.whl"))
        with zipfile.ZipFile(wheel) as zf:
            text = zf.read("recbole/dataset_example/ml-100k/ml-100k.inter")
    lines = text.splitlines(keepends=True)
    return b"".join(lines[1:])  # drop the "user_id:token ..." header


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = ap.parse_args()
    if args.out.is_file() and hashlib.md5(args.out.read_bytes()).hexdigest() == MD5:
        print(f"{args.out} already present")
        return 0
    data = None
    for name, fetch in (("grouplens", from_grouplens), ("recbole wheel", from_recbole)):
        try:
            data = fetch()
            print(f"fetched from {name}")
            break
        except Exception as exc:  # noqa: BLE001
            print(f"{name} failed: {exc}", file=sys.stderr)
    if data is None:
        return 1
    digest = hashlib.md5(data).hexdigest()
    rows = data.count(b"\n")
    if digest != MD5 or rows != ROWS:
        print(f"unexpected content: md5 {digest}, {rows} rows", file=sys.stderr)
        return 1
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_bytes(data)
    print(f"wrote {rows} ratings to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
