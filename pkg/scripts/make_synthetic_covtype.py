#!/usr/bin/env python3
"""Generate an offline stand-in for the Covertype download.

Usage: python scripts/make_synthetic_covtype.py [dest_dir] [rows] [seed]

Writes dest_dir/covtype_synthetic.libsvm: `rows` observations of 54
features from a logistic ground truth with moderate Bayes error, in the
same sparse text format the real download uses. Useful where the
experiment pipeline must run without network access; results are *not*
comparable to the real dataset's accuracy numbers.
"""

import sys
from pathlib import Path

from nvgd.targets import serialize_libsvm, synthetic_classification


def main() -> int:
    dest = Path(sys.argv[1] if len(sys.argv) > 1 else "data")
    rows = int(sys.argv[2]) if len(sys.argv) > 2 else 25_000
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 20_240_101
    dest.mkdir(parents=True, exist_ok=True)
    out = dest / "covtype_synthetic.libsvm"
    out.write_text(serialize_libsvm(synthetic_classification(rows, 54, seed=seed)))
    print(f"wrote {out} ({rows} rows, 54 features)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
