#!/usr/bin/env python3
"""Large-N density at several times around the critical one, plus the edge trajectories.

Writes density_profiles.csv and edges.csv into OUT (default: results/).
"""
import csv
import sys
from pathlib import Path

import numpy as np

from wishart_shocks.resolvent import density, lower_edge, shock_positions

A = 1.0
TAU_FRACTIONS = (0.25, 0.5, 1.0, 1.5, 2.0)
N_LAMBDA = 600

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
out.mkdir(parents=True, exist_ok=True)

taus = [f * A * A for f in TAU_FRACTIONS]
top = 1.05 * max(shock_positions(t, A).support[1] for t in taus)
lam = np.linspace(0.0, top, N_LAMBDA + 1)[1:]

with open(out / "density_profiles.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["tau", "lambda", "rho"])
    for tau in taus:
        curve = density(tau, A, 1.0, lam)
        print(f"tau={tau:.3f}  support={shock_positions(tau, A).support}  "
              f"mass defect={curve.normalization_defect:.1e}")
        w.writerows([tau, x, y] for x, y in zip(curve.lambdas, curve.rho))

with open(out / "edges.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["tau", "lower", "upper", "lower_unclipped"])
    for tau in np.linspace(0.02, 2.5, 125) * A * A:
        lo, hi = shock_positions(tau, A).support
        w.writerow([tau, lo, hi, lower_edge(tau, A)])
print("wrote", out / "density_profiles.csv", out / "edges.csv")
