"""Compare the Loewner and structured realizations on the benchmarks.

Run with ``python3 demos/benchmark_table.py [out_dir]``; with a directory the
Bode data, realization and report of every run are written below it.
"""

import os
import sys
import warnings

from structloewner import run_experiment

CASES = [("delay", 4), ("rod", 4), ("duct", 16), ("beam", 30)]
METHODS = ("loewner", "additional", "hermite")

out = sys.argv[1] if len(sys.argv) > 1 else None
print(f"{'case':8s} {'n':>3s} " + " ".join(f"{m:>12s}" for m in METHODS))
for name, n in CASES:
    row = []
    for method in METHODS:
        if name == "beam" and method == "hermite":
            row.append(f"{'-':>12s}")
            continue
        target = os.path.join(out, f"{name}-{method}") if out else None
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = run_experiment(name, n, method, out_dir=target)
        row.append(f"{res.report.max_abs:12.3e}")
    print(f"{name:8s} {n:3d} " + " ".join(row))
