"""Gap table for the 3-bus case: QC, RQC and TRQC at a few base power angles."""
import math
from pathlib import Path

from rqcopf.builders import optimality_gap, solve_relaxation
from rqcopf.caseio import load_case
from rqcopf.localopf import solve_local

DATA = Path(__file__).resolve().parents[1] / "data" / "pglib"

case = load_case(DATA / "pglib_opf_case3_lmbd.m")
loc = solve_local(case)
print(f"local AC objective {loc.objective:.3f} (violation {loc.max_violation:.1e})")

for kind, psi in [("qc", 0), ("rqc", 0), ("rqc", 80), ("rqc", -81), ("trqc", 80), ("trqc", 11)]:
    r = solve_relaxation(case, kind, math.radians(psi))
    gap = 100 * optimality_gap(loc.objective, r.objective)
    print(f"{kind:>4} psi={psi:>4}  bound {r.objective:10.3f}  gap {gap:.3f}%  [{r.status}]")
