#!/usr/bin/env python3
"""Real and complex characteristics launched near the initial spike.

Real starts just left of a^2 run into the lower shock; complex ones end
on the real axis inside the support.
"""
import csv
import sys
from pathlib import Path

import numpy as np

from wishart_shocks.resolvent import characteristic_curves

A = 1.0
TAU_MAX = 2.0
REAL_STARTS = np.linspace(-1.5, 3.5, 21)
COMPLEX_STARTS = [1.0 + y * 1j for y in (0.1, 0.3, 0.6, 1.0, 1.5)]

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results")
out.mkdir(parents=True, exist_ok=True)
taus = np.linspace(0.0, TAU_MAX, 201)

with open(out / "characteristics.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["kind", "re_start", "im_start", "tau", "re_z", "im_z"])
    for kind, starts in (("real", REAL_STARTS), ("complex", COMPLEX_STARTS)):
        # the map is parametrised by the offset from the spike at a^2
        z0 = [complex(s) - A * A for s in starts]
        z0 = [z if z != 0 else 1e-12 for z in z0]
        for s, curve in zip(starts, characteristic_curves(taus, z0, A)):
            s = complex(s)
            w.writerows([kind, s.real, s.imag, t, v.real, v.imag] for t, v in zip(taus, curve))
print("wrote", out / "characteristics.csv")
