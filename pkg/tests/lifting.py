"""Exact lifting of an AC operating point into a relaxation's variable space.

Used as an oracle: every nonconvex term (squares, trig functions, bilinear
and trilinear products) is evaluated in closed form at the point. The
convex-combination weights and the remaining auxiliaries are then recovered
with an LP over the program's own equality rows, made elastic so that the
point's own AC residual (SLSQP round-off) shows up as a small equality
residual instead of an infeasible LP. A sound relaxation admits the result
with residuals at that level.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from rqcopf.builders import branch_groups


def exact_values(case, kind, psi, point) -> dict[str, float]:
    vals: dict[str, float] = {}
    vm, va = point.vm, point.va
    for b in case.buses:
        vals[f"V[{b.id}]"] = vm[b.id]
        vals[f"theta[{b.id}]"] = va[b.id]
        vals[f"w[{b.id}]"] = vm[b.id] ** 2
    cp, sp_ = math.cos(psi), math.sin(psi)
    for k, g in enumerate(case.generators):
        pg, qg = point.pg[k], point.qg[k]
        if kind == "qc":
            vals[f"pg[{k}]"], vals[f"qg[{k}]"] = pg, qg
        else:
            vals[f"pt[{k}]"] = pg * cp + qg * sp_
            vals[f"qt[{k}]"] = -pg * sp_ + qg * cp
        if g.c2 > 0:
            vals[f"cost2[{k}]"] = g.c2 * pg * pg
    for grp in branch_groups(case):
        owner = case.branches[grp.owner]
        l, m = owner.from_bus, owner.to_bus
        td = va[l] - va[m]
        vv = vm[l] * vm[m]
        if kind == "qc":
            names, ang = ("C", "S", "c", "s"), td
        else:
            names, ang = ("Ct", "St", "ct", "st"), td - (owner.delta + owner.shift + psi)
        C, S = math.cos(ang), math.sin(ang)
        for n, v in zip(names, (C, S, vv * C, vv * S)):
            vals[f"{n}[{grp.key}]"] = v
    return vals


def lift(prog, vmap, case, kind, psi, point) -> np.ndarray:
    """Full variable vector for ``point`` minimizing the L1 equality residual."""
    vals = exact_values(case, kind, psi, point)
    n = prog.n
    fixed = np.zeros(n, dtype=bool)
    x = np.zeros(n)
    for name, v in vals.items():
        i = vmap[name]
        fixed[i], x[i] = True, v
    free = np.flatnonzero(~fixed)
    A = sp.csr_matrix(prog.A)
    rhs = prog.b - A[:, np.flatnonzero(fixed)] @ x[fixed]
    bounds = [(None if not np.isfinite(prog.lb[i]) else prog.lb[i],
               None if not np.isfinite(prog.ub[i]) else prog.ub[i]) for i in free]
    m = A.shape[0]
    A_el = sp.hstack([A[:, free], sp.eye(m), -sp.eye(m)], format="csr")
    cost = np.concatenate([np.zeros(len(free)), np.ones(2 * m)])
    res = linprog(cost, A_eq=A_el, b_eq=rhs, bounds=bounds + [(0, None)] * (2 * m), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise AssertionError(f"lifting LP failed: {res.message}")
    x[free] = res.x[:len(free)]
    # box bounds of free variables hold to the LP tolerance; clip round-off
    x[free] = np.clip(x[free], prog.lb[free], prog.ub[free])
    return x


def residuals(prog, x) -> dict[str, float]:
    eq = float(np.max(np.abs(prog.A @ x - prog.b), initial=0.0))
    lo = float(np.max(np.where(np.isfinite(prog.lb), prog.lb - x, 0.0), initial=0.0))
    hi = float(np.max(np.where(np.isfinite(prog.ub), x - prog.ub, 0.0), initial=0.0))
    cone = max((c.violation(x) for c in prog.cones), default=0.0)
    return {"equality": eq, "bounds": max(lo, hi, 0.0), "cone": cone}
