"""Sweep the base power angle on the 3-bus case and compare gaps 90 degrees apart."""
import sys
from pathlib import Path

import numpy as np

from rqcopf.caseio import load_case
from rqcopf.experiments import sweep

DATA = Path(__file__).resolve().parents[1] / "data" / "pglib"
step = float(sys.argv[1]) if len(sys.argv) > 1 else 3.0

case = load_case(DATA / "pglib_opf_case3_lmbd.m")
res = sweep(case, "rqc", np.arange(-90, 90 + step / 2, step), 5812.644, "derived", jobs=4)
print(f"psi* = {res.psi_star:g} deg, min gap {100 * res.min_gap:.4f}%")
for name, stats in res.symmetry().items():
    print(f"{name:>12}: {stats['pairs']} pairs, max diff {stats['max_abs_diff_pp']:.4f} pp")
for p, g in zip(res.psi_deg[::5], res.gap[::5]):
    print(f"{p:7.1f}  {100 * g:.4f}%  " + "#" * int(200 * g))
