"""Export a relaxation, read it back and compare our solver with cvxpy (if installed)."""
import math
from pathlib import Path

from rqcopf.builders import build
from rqcopf.caseio import load_case
from rqcopf.conic import solve
from rqcopf.conic.export import read_conic, solve_external, write_conic

DATA = Path(__file__).resolve().parents[1] / "data" / "pglib"

case = load_case(DATA / "pglib_opf_case5_pjm.m")
prog, _ = build(case, "trqc", math.radians(80))
text = write_conic(prog)
back = read_conic(text)
print(f"{prog.n} variables, {prog.m} equalities, {len(prog.cones)} cones, {len(text)} bytes")

ours = solve(back)
print(f"internal: {ours.status} {ours.primal_objective:.6f}")
try:
    status, obj, _ = solve_external(back)
except RuntimeError as exc:
    print(exc)
else:
    print(f"cvxpy:    {status} {obj:.6f}  rel diff {abs(obj - ours.primal_objective) / abs(obj):.1e}")
