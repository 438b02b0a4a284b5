"""Assembly of the QC, rotated QC and tightened rotated QC relaxations.

All three share the voltage-magnitude part (V, w and the square envelope),
bus balances, generator limits and the current-magnitude cone. They differ
in which trigonometric quantities are lifted:

* QC lifts cos(theta_lm) and sin(theta_lm) per connected bus pair and
  relaxes V_l V_m cos / V_l V_m sin with two trilinear hulls;
* RQC lifts the sending-end terms cos/sin(theta_lm - delta - shift - psi),
  relaxes both products with one hull over the polytope shared by the
  sending and receiving boxes, and enforces sending and receiving envelopes;
* TRQC additionally maps the RQC lifted pair back onto cos/sin(theta_lm)
  and enforces the plain envelopes there.

Parallel branches between the same two buses share one lifted pair; every
further branch sees a fixed rotation of it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np

from . import envelopes as env
from .caseio import Branch, CaseDataError, NetworkCase
from .conic import ConicProgram, Expr, ModelBuilder, SolveReport, Tolerances, solve
from .polytope import intersect_trig_polytopes, quadrilinear_hull
from .rotation import (OperatingPoint, inverse_rotation, rectangular_flows, rotate_injections,
                       terminal_relation)

Kind = Literal["qc", "rqc", "trqc"]


@dataclass(frozen=True)
class BuildOptions:
    policy: env.RowPolicy = "base-first"
    fallback: bool = False          # box-plus-secant for intervals no table row covers
    current_bound: bool = True      # ell <= (rating / v_min)^2 on rated branches


@dataclass
class BranchGroup:
    """Branches joining one unordered bus pair; the first one owns the lifted terms."""

    key: str
    owner: int
    members: list[tuple[int, int]]      # (branch index, +1 same / -1 reversed orientation)
    lo: float                           # theta_l - theta_m bounds in owner orientation
    hi: float


def branch_groups(case: NetworkCase) -> list[BranchGroup]:
    groups: dict[frozenset, BranchGroup] = {}
    order: list[BranchGroup] = []
    for k, br in enumerate(case.branches):
        pair = frozenset((br.from_bus, br.to_bus))
        g = groups.get(pair)
        if g is None:
            g = BranchGroup(f"{br.from_bus},{br.to_bus}", k, [], -math.inf, math.inf)
            groups[pair] = g
            order.append(g)
        owner = case.branches[g.owner]
        o = 1 if (br.from_bus, br.to_bus) == (owner.from_bus, owner.to_bus) else -1
        lo, hi = (br.angmin, br.angmax) if o > 0 else (-br.angmax, -br.angmin)
        g.lo, g.hi = max(g.lo, lo), min(g.hi, hi)
        g.members.append((k, o))
    for g in order:
        if g.lo > g.hi:
            raise CaseDataError(f"parallel branches {g.key} have disjoint angle limits")
    return order


@dataclass
class VariableMap:
    """Names of the program variables and the groups they belong to."""

    kind: Kind
    psi: float
    model: ModelBuilder = field(repr=False)

    @property
    def index(self) -> dict[str, int]:
        return self.model.index

    @property
    def groups(self) -> dict[str, list[str]]:
        return self.model.groups

    def __getitem__(self, name: str) -> int:
        return self.model.index[name]

    def __contains__(self, name: str) -> bool:
        return name in self.model.index

    def values(self, x: np.ndarray, group: str | None = None) -> dict[str, float]:
        names = self.model.groups.get(group, []) if group else self.model.names
        return {n: float(x[self.model.index[n]]) for n in names}

    def complete(self, values: Mapping[str, float]) -> np.ndarray:
        """Full point from the independent variables, filling every defined one."""
        return self.model.complete(values)


def _bind(c: env.AffineConstraint, names: Mapping[str, Expr]) -> Expr:
    e = Expr()
    for name, coef in c.coeffs:
        e.add(names[name], coef)
    return e


class _Builder:
    def __init__(self, case: NetworkCase, kind: Kind, psi: float, opts: BuildOptions):
        if kind not in ("qc", "rqc", "trqc"):
            raise ValueError(f"unknown relaxation kind {kind!r}")
        self.case = case
        self.kind = kind
        self.psi = 0.0 if kind == "qc" else float(psi)
        self.opts = opts
        self.m = ModelBuilder()
        self.bus_ix = case.bus_index()

    # helpers
    def V(self, bus: int) -> Expr:
        return self.m.v(f"V[{bus}]")

    def w(self, bus: int) -> Expr:
        return self.m.v(f"w[{bus}]")

    def emit(self, c: env.AffineConstraint, names: Mapping[str, Expr], label: str) -> None:
        if not c.coeffs:
            return
        self.m.add_rel(_bind(c, names), c.sense, c.rhs, f"{label}:{c.label}")

    def emit_trig(self, e: env.TrigEnvelope, angle: Expr, lifted: Expr, label: str) -> None:
        names = {e.angle: angle, e.lifted: lifted}
        for c in e.constraints:
            self.emit(c, names, label)
        q = e.quadratic
        if q is not None:
            if q.k <= 0:
                self.m.add_le(lifted * q.sign, q.rhs, f"{label}:{q.label}")
            else:
                # k (x - c)^2 <= rhs - sign f  as  (x - c)^2 <= 2 u v, v = 1/(2k)
                u = Expr(const=q.rhs) - lifted * q.sign
                v = Expr(const=1.0 / (2.0 * q.k))
                self.m.add_rsoc(u, v, [angle - q.center], f"{label}:{q.label}")

    def envelope(self, func: str, lo: float, hi: float):
        make = env.sine_envelope if func == "sin" else env.cosine_envelope
        return make(lo, hi, "x", "f", policy=self.opts.policy, fallback=self.opts.fallback)

    # shared parts
    def buses(self) -> None:
        m = self.m
        for bus in self.case.buses:
            m.add_var(f"V[{bus.id}]", bus.v_min, bus.v_max, group="V")
            m.add_var(f"theta[{bus.id}]", group="theta")
            m.add_var(f"w[{bus.id}]", bus.v_min ** 2, bus.v_max ** 2, group="w")
            sq = env.square_envelope(bus.v_min, bus.v_max, "x", "w")
            names = {"x": self.V(bus.id), "w": self.w(bus.id)}
            for c in sq.constraints:
                self.emit(c, names, f"square[{bus.id}]")
            if sq.conic:
                m.add_rsoc(self.w(bus.id), Expr(const=0.5), [self.V(bus.id)], f"square[{bus.id}]")
        for r in sorted(self.case.reference_buses):
            m.add_eq(m.v(f"theta[{r}]"), 0.0, f"reference[{r}]")

    def generators(self) -> None:
        m = self.m
        cp, sp_ = math.cos(self.psi), math.sin(self.psi)
        for k, gen in enumerate(self.case.generators):
            if self.kind == "qc":
                m.add_var(f"pg[{k}]", gen.p_min, gen.p_max, group="pg")
                m.add_var(f"qg[{k}]", gen.q_min, gen.q_max, group="qg")
            else:
                m.add_var(f"pt[{k}]", group="pt")
                m.add_var(f"qt[{k}]", group="qt")
                pt, qt = m.v(f"pt[{k}]"), m.v(f"qt[{k}]")
                m.define(f"pg[{k}]", pt * cp - qt * sp_, gen.p_min, gen.p_max, group="pg")
                m.define(f"qg[{k}]", pt * sp_ + qt * cp, gen.q_min, gen.q_max, group="qg")
            pg = m.v(f"pg[{k}]")
            m.add_objective(pg * gen.c1 + gen.c0)
            if gen.c2 > 0:
                t = m.add_var(f"cost2[{k}]", 0.0, group="cost2")
                m.add_rsoc(Expr.var(t), Expr(const=0.5), [pg * math.sqrt(gen.c2)], f"cost[{k}]")
                m.add_objective(Expr.var(t))

    def balances(self, flows: dict[int, tuple[Expr, Expr, Expr, Expr]]) -> None:
        m = self.m
        ctx = rotate_injections(self.case, self.psi)
        inj_p = {b.id: Expr() for b in self.case.buses}
        inj_q = {b.id: Expr() for b in self.case.buses}
        pn, qn = ("pg", "qg") if self.kind == "qc" else ("pt", "qt")
        for k, gen in enumerate(self.case.generators):
            inj_p[gen.bus].add(m.v(f"{pn}[{k}]"))
            inj_q[gen.bus].add(m.v(f"{qn}[{k}]"))
        for k, br in enumerate(self.case.branches):
            pf, qf, pt, qt = flows[k]
            inj_p[br.from_bus].add(pf, -1.0)
            inj_q[br.from_bus].add(qf, -1.0)
            inj_p[br.to_bus].add(pt, -1.0)
            inj_q[br.to_bus].add(qt, -1.0)
        for i, bus in enumerate(self.case.buses):
            gs, bs = ctx.shunt(bus.g_shunt, bus.b_shunt)
            # generation - shunt consumption - flows = demand
            m.add_eq(inj_p[bus.id] - self.w(bus.id) * gs, ctx.p_demand[i], f"balance_p[{bus.id}]")
            m.add_eq(inj_q[bus.id] - self.w(bus.id) * bs, ctx.q_demand[i], f"balance_q[{bus.id}]")

    def branch_limits(self, k: int, br: Branch, flows, ell: Expr) -> None:
        m = self.m
        pf, qf, pt, qt = flows
        l_i = m.define(f"ell[{k}]", ell, 0.0, group="ell")
        if self.opts.current_bound and br.s_rating is not None:
            vmin = self.case.buses[self.bus_ix[br.from_bus]].v_min
            m.tighten(l_i, ub=(br.s_rating / vmin) ** 2)
        m.add_rsoc(self.w(br.from_bus), Expr.var(l_i) * 0.5, [pf, qf], f"current[{k}]")
        if br.s_rating is not None:
            for end, (p, q) in (("fr", (pf, qf)), ("to", (pt, qt))):
                head = m.constant(f"rating[{k},{end}]", br.s_rating)
                m.add_soc(Expr.var(head), [p, q], f"thermal[{k},{end}]")

    def angle_difference(self, g: BranchGroup) -> Expr:
        owner = self.case.branches[g.owner]
        td = self.m.define(f"td[{g.key}]", self.m.v(f"theta[{owner.from_bus}]") - self.m.v(f"theta[{owner.to_bus}]"),
                           g.lo, g.hi, group="td")
        return Expr.var(td)

    # QC
    def qc_group(self, g: BranchGroup, flows: dict, ells: dict) -> None:
        m = self.m
        owner = self.case.branches[g.owner]
        l, mm = owner.from_bus, owner.to_bus
        td = self.angle_difference(g)
        smin, smax, cmin, cmax = env.trig_bounds(g.lo, g.hi)
        C = Expr.var(m.add_var(f"C[{g.key}]", cmin, cmax, group="trig"))
        S = Expr.var(m.add_var(f"S[{g.key}]", smin, smax, group="trig"))
        self.emit_trig(self.envelope("cos", g.lo, g.hi), td, C, f"cos[{g.key}]")
        self.emit_trig(self.envelope("sin", g.lo, g.hi), td, S, f"sin[{g.key}]")
        vl = self.case.buses[self.bus_ix[l]]
        vm = self.case.buses[self.bus_ix[mm]]
        c = Expr.var(m.add_var(f"c[{g.key}]", group="product"))
        s = Expr.var(m.add_var(f"s[{g.key}]", group="product"))
        lam = env.trilinear_hull((vl.v_min, vl.v_max), (vm.v_min, vm.v_max), (cmin, cmax),
                                 ("Vl", "Vm", "T"), "p", "lam")
        gam = env.trilinear_hull((vl.v_min, vl.v_max), (vm.v_min, vm.v_max), (smin, smax),
                                 ("Vl", "Vm", "T"), "p", "gam")
        weights: dict[str, Expr] = {}
        for hull, trig, prod, tag in ((lam, C, c, "lam"), (gam, S, s, "gam")):
            names = {"Vl": self.V(l), "Vm": self.V(mm), "T": trig, "p": prod}
            for j, wn in enumerate(hull.weights):
                names[wn] = weights[wn] = Expr.var(m.add_var(f"{tag}[{g.key}][{j}]", 0.0, group="weights"))
            for row in hull.rows():
                self.emit(row, names, f"{tag}[{g.key}]")
        self.emit(env.linking_constraint(lam, gam), weights, f"link[{g.key}]")
        for k, o in g.members:
            br = self.case.branches[k]
            cs, sn = math.cos(br.shift), math.sin(br.shift)
            # V_l V_m cos / sin of (member angle - shift), member angle = o * theta_lm
            cc = c * cs + s * (o * sn)
            ss = s * (o * cs) - c * sn
            f_, t_ = br.from_bus, br.to_bus
            gg, bb, tau, bsh = br.g, br.b, br.tau, br.b + br.b_c / 2
            pf = self.w(f_) * (gg / tau ** 2) - (cc * gg + ss * bb) * (1 / tau)
            qf = self.w(f_) * (-bsh / tau ** 2) + (cc * bb - ss * gg) * (1 / tau)
            pt = self.w(t_) * gg - (cc * gg - ss * bb) * (1 / tau)
            qt = self.w(t_) * (-bsh) + (cc * bb + ss * gg) * (1 / tau)
            flows[k] = self.flow_vars(k, (pf, qf, pt, qt))
            Y2 = br.Y ** 2
            ell = (self.w(f_) * ((Y2 - br.b_c ** 2 / 4) / tau ** 4) + self.w(t_) * (Y2 / tau ** 2)
                   - flows[k][1] * (br.b_c / tau ** 2) - cc * (2 * Y2 / tau ** 3))
            ells[k] = ell

    def flow_vars(self, k: int, exprs) -> tuple[Expr, Expr, Expr, Expr]:
        out = []
        for name, e in zip(("p", "q"), exprs[:2]):
            out.append(Expr.var(self.m.define(f"{name}[{k},fr]", e, group="flow")))
        for name, e in zip(("p", "q"), exprs[2:]):
            out.append(Expr.var(self.m.define(f"{name}[{k},to]", e, group="flow")))
        return tuple(out)

    # RQC / TRQC
    def rqc_group(self, g: BranchGroup, flows: dict, ells: dict) -> None:
        m = self.m
        psi = self.psi
        owner = self.case.branches[g.owner]
        l, mm = owner.from_bus, owner.to_bus
        td = self.angle_difference(g)
        sig1 = owner.delta + owner.shift + psi
        rel1 = terminal_relation(owner, psi)
        # owner intervals
        s_lo, s_hi = g.lo - sig1, g.hi - sig1
        r_off = -owner.shift + rel1.delta_hat
        r_lo, r_hi = g.lo + r_off, g.hi + r_off
        smin, smax, cmin, cmax = env.trig_bounds(s_lo, s_hi)
        rsmin, rsmax, rcmin, rcmax = env.trig_bounds(r_lo, r_hi)
        poly = intersect_trig_polytopes((cmin, cmax, smin, smax), (rcmin, rcmax, rsmin, rsmax), rel1)
        cbox = (float(poly.vertices[:, 0].min()), float(poly.vertices[:, 0].max()))
        sbox = (float(poly.vertices[:, 1].min()), float(poly.vertices[:, 1].max()))
        C = Expr.var(m.add_var(f"Ct[{g.key}]", *cbox, group="trig"))
        S = Expr.var(m.add_var(f"St[{g.key}]", *sbox, group="trig"))
        c = Expr.var(m.add_var(f"ct[{g.key}]", group="product"))
        s = Expr.var(m.add_var(f"st[{g.key}]", group="product"))
        vl = self.case.buses[self.bus_ix[l]]
        vm = self.case.buses[self.bus_ix[mm]]
        hull = quadrilinear_hull((vl.v_min, vl.v_max), (vm.v_min, vm.v_max), poly,
                                 ("Vl", "Vm", "C", "S"), ("c", "s"), "w")
        names = {"Vl": self.V(l), "Vm": self.V(mm), "C": C, "S": S, "c": c, "s": s}
        for j, wn in enumerate(hull.weights):
            names[wn] = Expr.var(m.add_var(f"eta[{g.key}][{j}]", 0.0, group="weights"))
        for row in hull.rows():
            self.emit(row, names, f"hull[{g.key}]")

        for k, o in g.members:
            br = self.case.branches[k]
            sig = br.delta + br.shift + psi
            if o > 0:
                d = sig1 - sig
                T = np.array([[math.cos(d), -math.sin(d)], [math.sin(d), math.cos(d)]])
            else:
                gm = sig1 + sig
                T = np.array([[math.cos(gm), -math.sin(gm)], [-math.sin(gm), -math.cos(gm)]])
            Ck = C * T[0, 0] + S * T[0, 1]
            Sk = C * T[1, 0] + S * T[1, 1]
            ck = c * T[0, 0] + s * T[0, 1]
            sk = c * T[1, 0] + s * T[1, 1]
            lo, hi = (g.lo, g.hi) if o > 0 else (-g.hi, -g.lo)
            ang = td * o
            rel = terminal_relation(br, psi)
            a, b = rel.alpha, rel.beta
            tag = f"[{g.key}|{k}]"
            # sending-end envelopes
            self.emit_trig(self.envelope("cos", lo - sig, hi - sig), ang - sig, Ck, "cos_s" + tag)
            self.emit_trig(self.envelope("sin", lo - sig, hi - sig), ang - sig, Sk, "sin_s" + tag)
            # receiving-end envelopes through the terminal relation
            off = -br.shift + rel.delta_hat
            self.emit_trig(self.envelope("sin", lo + off, hi + off), ang + off, Sk * a + Ck * b, "sin_r" + tag)
            self.emit_trig(self.envelope("cos", lo + off, hi + off), ang + off, Ck * a - Sk * b, "cos_r" + tag)
            # flows in the rotated base
            f_, t_ = br.from_bus, br.to_bus
            Y, tau = br.Y, br.tau
            dh = rel.delta_hat
            kp = Y * math.cos(dh) - br.b_c / 2 * math.sin(psi)
            kq = -(Y * math.sin(dh) + br.b_c / 2 * math.cos(psi))
            cr = ck * a - sk * b       # V_l V_m cos(u + delta_hat)
            sr = sk * a + ck * b       # V_l V_m sin(u + delta_hat)
            pf = self.w(f_) * (kp / tau ** 2) - ck * (Y / tau)
            qf = self.w(f_) * (kq / tau ** 2) - sk * (Y / tau)
            pt = self.w(t_) * kp - cr * (Y / tau)
            qt = self.w(t_) * kq + sr * (Y / tau)
            flows[k] = self.flow_vars(k, (pf, qf, pt, qt))
            Y2, bc = Y * Y, br.b_c
            ell = (self.w(f_) * ((Y2 + bc * bc / 4 + Y * bc * math.sin(br.delta)) / tau ** 4)
                   + self.w(t_) * (Y2 / tau ** 2)
                   + ck * ((Y * bc * math.sin(psi) - 2 * Y2 * math.cos(dh)) / tau ** 3)
                   + sk * ((Y * bc * math.cos(psi) + 2 * Y2 * math.sin(dh)) / tau ** 3))
            ells[k] = ell

        if self.kind == "trqc":
            ca, sa = math.cos(sig1), math.sin(sig1)
            cos_th = S * (-sa) + C * ca
            sin_th = S * ca + C * sa
            self.emit_trig(self.envelope("cos", g.lo, g.hi), td, cos_th, f"cos_theta[{g.key}]")
            self.emit_trig(self.envelope("sin", g.lo, g.hi), td, sin_th, f"sin_theta[{g.key}]")

    def build(self) -> tuple[ConicProgram, VariableMap]:
        self.buses()
        self.generators()
        flows: dict[int, tuple] = {}
        ells: dict[int, Expr] = {}
        for g in branch_groups(self.case):
            if self.kind == "qc":
                self.qc_group(g, flows, ells)
            else:
                self.rqc_group(g, flows, ells)
        for k, br in enumerate(self.case.branches):
            self.branch_limits(k, br, flows[k], ells[k])
        self.balances(flows)
        meta = {"case": self.case.name, "kind": self.kind, "psi": self.psi,
                "policy": self.opts.policy}
        return self.m.build(meta), VariableMap(self.kind, self.psi, self.m)


def build(case: NetworkCase, kind: Kind, psi: float = 0.0,
          options: BuildOptions | None = None) -> tuple[ConicProgram, VariableMap]:
    return _Builder(case, kind, psi, options or BuildOptions()).build()


def build_qc(case: NetworkCase, options: BuildOptions | None = None):
    return build(case, "qc", 0.0, options)


def build_rqc(case: NetworkCase, psi: float, options: BuildOptions | None = None):
    return build(case, "rqc", psi, options)


def build_trqc(case: NetworkCase, psi: float, options: BuildOptions | None = None):
    return build(case, "trqc", psi, options)


# ---------------------------------------------------------------- results

@dataclass(frozen=True, eq=False)
class RelaxationResult:
    status: str
    objective: float
    kind: Kind
    psi: float
    values: dict[str, float]
    pg: tuple[float, ...]
    qg: tuple[float, ...]
    solve_time: float
    build_time: float
    report: SolveReport | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"status": self.status, "objective": self.objective, "kind": self.kind,
                "psi_deg": math.degrees(self.psi), "pg": list(self.pg), "qg": list(self.qg),
                "solve_time": self.solve_time, "build_time": self.build_time,
                "kkt": self.report.kkt if self.report else {}}


def solve_relaxation(case: NetworkCase, kind: Kind, psi: float = 0.0,
                     options: BuildOptions | None = None,
                     tol: Tolerances | None = None) -> RelaxationResult:
    t0 = time.perf_counter()
    prog, vmap = build(case, kind, psi, options)
    t1 = time.perf_counter()
    rep = solve(prog, tol)
    ng = len(case.generators)
    if rep.status == "Optimal":
        vals = {n: float(rep.x[i]) for n, i in vmap.index.items()
                if not n.startswith(("slack:", "cone:"))}
        pg = tuple(vals[f"pg[{k}]"] for k in range(ng))
        qg = tuple(vals[f"qg[{k}]"] for k in range(ng))
    else:
        vals, pg, qg = {}, (), ()
    return RelaxationResult(rep.status, rep.primal_objective if rep.status == "Optimal" else math.nan,
                            kind, vmap.psi, vals, pg, qg, rep.wall_time, t1 - t0, rep)


def recover_original(result: RelaxationResult, psi: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Generation in the original base from the rotated dispatch of a result."""
    if result.status != "Optimal":
        raise ValueError(f"result status is {result.status}, not Optimal")
    if result.kind == "qc":
        return np.array(result.pg), np.array(result.qg)
    psi = result.psi if psi is None else psi
    ng = len(result.pg)
    pt = np.array([result.values[f"pt[{k}]"] for k in range(ng)])
    qt = np.array([result.values[f"qt[{k}]"] for k in range(ng)])
    return inverse_rotation(pt, qt, psi)


def optimality_gap(local_objective: float, bound: float) -> float:
    if not local_objective > 0:
        raise ValueError("local objective must be positive")
    return (local_objective - bound) / local_objective


# ---------------------------------------------------------------- AC residuals

@dataclass(frozen=True)
class ACResiduals:
    balance_p: np.ndarray
    balance_q: np.ndarray
    generator: np.ndarray
    voltage: np.ndarray
    angle: np.ndarray
    thermal: np.ndarray
    reference: np.ndarray

    @property
    def max_violation(self) -> float:
        parts = [np.abs(self.balance_p), np.abs(self.balance_q), self.generator, self.voltage,
                 self.angle, self.thermal, np.abs(self.reference)]
        return float(max((np.max(p, initial=0.0) for p in parts), default=0.0))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.balance_p, self.balance_q, self.generator, self.voltage,
                               self.angle, self.thermal, self.reference])


def ac_residuals(case: NetworkCase, point: OperatingPoint) -> ACResiduals:
    """Violations of the nonconvex AC model; equalities signed, limits as positive parts."""
    idx = case.bus_index()
    n = len(case.buses)
    bp = np.array([-b.p_demand - b.g_shunt * point.vm[b.id] ** 2 for b in case.buses])
    bq = np.array([-b.q_demand + b.b_shunt * point.vm[b.id] ** 2 for b in case.buses])
    gen = []
    for k, g in enumerate(case.generators):
        bp[idx[g.bus]] += point.pg[k]
        bq[idx[g.bus]] += point.qg[k]
        gen += [max(g.p_min - point.pg[k], 0.0), max(point.pg[k] - g.p_max, 0.0),
                max(g.q_min - point.qg[k], 0.0), max(point.qg[k] - g.q_max, 0.0)]
    ang, th = [], []
    for br in case.branches:
        pf, qf, pt, qt = rectangular_flows(point, br)
        bp[idx[br.from_bus]] -= pf
        bq[idx[br.from_bus]] -= qf
        bp[idx[br.to_bus]] -= pt
        bq[idx[br.to_bus]] -= qt
        d = point.va[br.from_bus] - point.va[br.to_bus]
        ang += [max(br.angmin - d, 0.0), max(d - br.angmax, 0.0)]
        if br.s_rating is not None:
            th += [max(math.hypot(pf, qf) - br.s_rating, 0.0), max(math.hypot(pt, qt) - br.s_rating, 0.0)]
    volt = []
    for b in case.buses:
        volt += [max(b.v_min - point.vm[b.id], 0.0), max(point.vm[b.id] - b.v_max, 0.0)]
    ref = np.array([point.va[r] for r in sorted(case.reference_buses)])
    del n
    return ACResiduals(bp, bq, np.array(gen), np.array(volt), np.array(ang), np.array(th), ref)


def point_cost(case: NetworkCase, point: OperatingPoint) -> float:
    return float(sum(g.cost(p) for g, p in zip(case.generators, point.pg)))


def lifted_count(vmap: VariableMap) -> int:
    """Number of lifted trigonometric variables registered by a build."""
    return len(vmap.groups.get("trig", []))


def connected_pairs(case: NetworkCase) -> int:
    return len({frozenset((b.from_bus, b.to_bus)) for b in case.branches})


__all__: Sequence[str] = (
    "ACResiduals", "BranchGroup", "BuildOptions", "RelaxationResult", "VariableMap",
    "ac_residuals", "branch_groups", "build", "build_qc", "build_rqc", "build_trqc",
    "connected_pairs", "lifted_count", "optimality_gap", "point_cost", "recover_original",
    "solve_relaxation",
)
