#!/usr/bin/env python3
"""Mean smallest eigenvalue at the critical time against N, with a log-log fit.

usage: smallest_eigenvalue_scaling.py [OUT] [TRIALS]
"""
import csv
import sys
import time
from pathlib import Path

import numpy as np

from wishart_shocks.diffusion import EnsembleParams, run_trials

A = 1.0
NS = (50, 100, 200, 400)
SEED = 0

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
trials = int(sys.argv[2]) if len(sys.argv) > 2 else 200
out.mkdir(parents=True, exist_ok=True)

rows = []
for N in NS:
    t0 = time.perf_counter()
    stats = run_trials(EnsembleParams(N, N, A, A * A, seed=SEED), trials)
    m = stats.smallest.mean()
    se = stats.smallest.std(ddof=1) / np.sqrt(trials)
    rows.append((N, m, se))
    print(f"N={N:4d}  <lambda_min>={m:.4e} +- {se:.1e}  ({time.perf_counter() - t0:.1f}s)")

slope, icpt = np.polyfit(np.log(NS), np.log([r[1] for r in rows]), 1)
print(f"fitted exponent {slope:.3f} (N^-3/2 expected from the lambda^-1/3 hard edge)")

with open(out / "smallest_eigenvalue.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["N", "mean", "stderr", "fit"])
    w.writerows([N, m, se, np.exp(icpt) * N**slope] for N, m, se in rows)
