#!/usr/bin/env python3
"""Download the binary Covertype dataset (LIBSVM format) for the
logistic-regression experiment.

Usage: python scripts/fetch_covertype.py [dest_dir]

Writes dest_dir/covtype.libsvm (default data/). Needs network access;
in offline environments generate the stand-in instead:

    python scripts/make_synthetic_covtype.py data/

The download is verified by parsing it and checking the advertised row
count (581,012). The sha256 of the decompressed file is printed so it
can be pinned alongside stored copies.
"""

import bz2
import hashlib
import sys
import urllib.request
from pathlib import Path

URL = (
    "https://www.csie.ntu.edu.tw/~cjlin/libsvmtools/datasets/binary/"
    "covtype.libsvm.binary.scale.bz2"
)
EXPECTED_ROWS = 581_012


def main() -> int:
    dest = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    dest.mkdir(parents=True, exist_ok=True)
    out = dest / "covtype.libsvm"
    if out.exists():
        print(f"{out} already exists; delete it to re-download")
        return 0
    print(f"downloading {URL} ...")
    raw = urllib.request.urlopen(URL, timeout=120).read()
    text = bz2.decompress(raw)
    print(f"sha256 (decompressed): {hashlib.sha256(text).hexdigest()}")
    rows = sum(1 for line in text.splitlines() if line.strip())
    if rows != EXPECTED_ROWS:
        print(f"error: expected {EXPECTED_ROWS} rows, file has {rows}", file=sys.stderr)
        return 1
    out.write_bytes(text)
    print(f"wrote {out} ({rows} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
