"""Local AC-OPF solutions with scipy's SLSQP.

Used to produce local objectives (upper bounds) for the gap computation when
no published value is available, and feasible points for testing that a
relaxation contains the AC feasible set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, minimize

from .caseio import NetworkCase
from .rotation import OperatingPoint


@dataclass(frozen=True)
class LocalSolution:
    objective: float
    point: OperatingPoint
    success: bool
    message: str
    max_violation: float


class _Model:
    def __init__(self, case: NetworkCase):
        self.case = case
        idx = case.bus_index()
        self.nb, self.ng = len(case.buses), len(case.generators)
        self.ref = np.array([idx[r] for r in sorted(case.reference_buses)], dtype=int)
        br = case.branches
        self.f = np.array([idx[b.from_bus] for b in br], dtype=int)
        self.t = np.array([idx[b.to_bus] for b in br], dtype=int)
        self.g = np.array([b.g for b in br])
        self.b = np.array([b.b for b in br])
        self.bc = np.array([b.b_c for b in br])
        self.tau = np.array([b.tau for b in br])
        self.shift = np.array([b.shift for b in br])
        self.rate = np.array([b.s_rating if b.s_rating is not None else np.inf for b in br])
        self.amin = np.array([b.angmin for b in br])
        self.amax = np.array([b.angmax for b in br])
        self.gbus = np.array([idx[g.bus] for g in case.generators], dtype=int)
        self.pd = np.array([b.p_demand for b in case.buses])
        self.qd = np.array([b.q_demand for b in case.buses])
        self.gs = np.array([b.g_shunt for b in case.buses])
        self.bs = np.array([b.b_shunt for b in case.buses])
        self.c2 = np.array([g.c2 for g in case.generators])
        self.c1 = np.array([g.c1 for g in case.generators])
        self.c0 = float(sum(g.c0 for g in case.generators))
        self.limited = np.flatnonzero(np.isfinite(self.rate))

    def split(self, z):
        nb, ng = self.nb, self.ng
        return z[:nb], z[nb:2 * nb], z[2 * nb:2 * nb + ng], z[2 * nb + ng:]

    def flows(self, va, vm):
        vl, vr = vm[self.f], vm[self.t]
        th = va[self.f] - va[self.t] - self.shift
        vv = vl * vr / self.tau
        c, s = vv * np.cos(th), vv * np.sin(th)
        g, b, bsh, t2 = self.g, self.b, self.b + self.bc / 2, self.tau ** 2
        p_lm = g * vl * vl / t2 - g * c - b * s
        q_lm = -bsh * vl * vl / t2 + b * c - g * s
        p_ml = g * vr * vr - g * c + b * s
        q_ml = -bsh * vr * vr + b * c + g * s
        return p_lm, q_lm, p_ml, q_ml

    def cost(self, z):
        pg = self.split(z)[2]
        return float(np.sum(self.c2 * pg * pg + self.c1 * pg) + self.c0)

    def cost_grad(self, z):
        out = np.zeros_like(z)
        pg = self.split(z)[2]
        out[2 * self.nb:2 * self.nb + self.ng] = 2 * self.c2 * pg + self.c1
        return out

    def equalities(self, z):
        va, vm, pg, qg = self.split(z)
        p_lm, q_lm, p_ml, q_ml = self.flows(va, vm)
        mp = -self.pd - self.gs * vm * vm
        mq = -self.qd + self.bs * vm * vm
        mp = mp + np.bincount(self.gbus, pg, self.nb)
        mq = mq + np.bincount(self.gbus, qg, self.nb)
        mp -= np.bincount(self.f, p_lm, self.nb) + np.bincount(self.t, p_ml, self.nb)
        mq -= np.bincount(self.f, q_lm, self.nb) + np.bincount(self.t, q_ml, self.nb)
        return np.concatenate([mp, mq, va[self.ref]])

    def inequalities(self, z):
        va, vm, _, _ = self.split(z)
        p_lm, q_lm, p_ml, q_ml = self.flows(va, vm)
        k = self.limited
        # normalized by the rating, with a small inward margin so SLSQP's
        # final tolerance does not leave the point just outside the limit
        r2 = (self.rate[k] * (1 - 1e-6)) ** 2
        d = va[self.f] - va[self.t]
        return np.concatenate([1 - (p_lm[k] ** 2 + q_lm[k] ** 2) / r2,
                               1 - (p_ml[k] ** 2 + q_ml[k] ** 2) / r2,
                               d - self.amin, self.amax - d])

    def bounds(self):
        c = self.case
        va = [(-math.pi, math.pi)] * self.nb
        vm = [(b.v_min, b.v_max) for b in c.buses]
        pg = [(g.p_min, g.p_max) for g in c.generators]
        qg = [(g.q_min, g.q_max) for g in c.generators]
        return va + vm + pg + qg

    def start(self, flat: bool):
        c = self.case
        va = np.zeros(self.nb) if flat else np.array([b.va for b in c.buses])
        vm = np.array([(b.v_min + b.v_max) / 2 if flat else min(max(b.vm, b.v_min), b.v_max)
                       for b in c.buses])
        pg = np.array([(g.p_min + g.p_max) / 2 for g in c.generators])
        qg = np.array([(g.q_min + g.q_max) / 2 for g in c.generators])
        return np.concatenate([va, vm, pg, qg])

    def point(self, z) -> OperatingPoint:
        va, vm, pg, qg = self.split(z)
        ids = [b.id for b in self.case.buses]
        return OperatingPoint(dict(zip(ids, map(float, vm))), dict(zip(ids, map(float, va))),
                              tuple(map(float, pg)), tuple(map(float, qg)))

    def violation(self, z) -> float:
        va, vm, _, _ = self.split(z)
        p_lm, q_lm, p_ml, q_ml = self.flows(va, vm)
        k = self.limited
        eq = np.max(np.abs(self.equalities(z)), initial=0.0)
        d = va[self.f] - va[self.t]
        over = np.concatenate([np.hypot(p_lm[k], q_lm[k]) - self.rate[k],
                               np.hypot(p_ml[k], q_ml[k]) - self.rate[k],
                               self.amin - d, d - self.amax])
        return float(max(eq, np.max(over, initial=0.0)))


def _polish(model: _Model, z: np.ndarray) -> np.ndarray:
    """Drive constraint residuals to round-off with a bounded least-squares step.

    SLSQP leaves violations near 1e-7. Violated inequality rows enter the
    residual through their negative part, so the step restores them too.
    """
    lo, hi = (np.array(v) for v in zip(*model.bounds()))
    z = np.clip(z, lo, hi)

    def resid(x):
        return np.concatenate([model.equalities(x), np.minimum(model.inequalities(x), 0.0)])

    try:
        res = least_squares(resid, z, bounds=(lo, hi), xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=100)
    except ValueError:
        return z
    return res.x if model.violation(res.x) < model.violation(z) else z


def solve_local(case: NetworkCase, max_iter: int = 500, tol: float = 1e-10) -> LocalSolution:
    """Best of a flat start and the case's stored voltage profile."""
    model = _Model(case)
    best: LocalSolution | None = None
    for flat in (False, True):
        res = minimize(model.cost, model.start(flat), jac=model.cost_grad, method="SLSQP",
                       bounds=model.bounds(),
                       constraints=[{"type": "eq", "fun": model.equalities},
                                    {"type": "ineq", "fun": model.inequalities}],
                       options={"maxiter": max_iter, "ftol": tol})
        # SLSQP often stops on "positive directional derivative" at a converged
        # point, so acceptance is judged on the constraint violation alone
        z = _polish(model, res.x)
        viol = model.violation(z)
        sol = LocalSolution(float(model.cost(z)), model.point(z), viol < 1e-6, str(res.message), viol)
        if best is None or (sol.success, -sol.objective) > (best.success, -best.objective):
            best = sol
    assert best is not None
    return best
