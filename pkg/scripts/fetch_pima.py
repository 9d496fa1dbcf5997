#!/usr/bin/env python3
"""Rebuild the bundled Pima table from the 768-row UCI file and verify it.

The source may be a local path or a URL, with or without a header row, in
the usual column order. Zeros in PGC, DBP and BMI are physically impossible
and are written as empty cells so that complete-case filtering keeps 724 rows.

    python scripts/fetch_pima.py SOURCE [--out src/gaplm/data/pima.csv]
"""
import argparse
import csv
import hashlib
import io
import sys
import urllib.request
from pathlib import Path

from gaplm.io import PIMA_SHA256, pima_path

COLUMNS = ["NumPreg", "PGC", "DBP", "TSF", "Insulin", "BMI", "DPF", "AGE", "Outcome"]
ZERO_IS_MISSING = ("PGC", "DBP", "BMI")


def read_source(src):
    if src.startswith(("http://", "https://")):
        with urllib.request.urlopen(src, timeout=60) as fh:
            return fh.read().decode()
    return Path(src).read_text()


def convert(text):
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if not rows[0][0].replace(".", "").isdigit():
        rows = rows[1:]
    if len(rows) != 768 or any(len(r) != len(COLUMNS) for r in rows):
        raise SystemExit(f"expected 768 rows of {len(COLUMNS)} fields, got {len(rows)}")
    blank = [COLUMNS.index(c) for c in ZERO_IS_MISSING]
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(["" if j in blank and float(v) == 0 else v.strip() for j, v in enumerate(r)])
    return out.getvalue().encode()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("source", nargs="?", help="path or URL of the raw 768-row file (default: check the bundled copy)")
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()
    data = pima_path().read_bytes() if args.source is None else convert(read_source(args.source))
    digest = hashlib.sha256(data).hexdigest()
    if digest != PIMA_SHA256:
        print(f"checksum mismatch: {digest} != {PIMA_SHA256}", file=sys.stderr)
        return 1
    if args.out is not None:
        args.out.write_bytes(data)
        print(f"wrote {args.out}")
    print(f"sha256 ok: {digest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
