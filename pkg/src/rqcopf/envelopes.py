"""Convex envelopes for the nonconvex terms of AC power flow.

Every envelope is expressed over *named* quantities (``"x"``, ``"S"``, ...).
A builder later binds names to affine expressions of program variables, so
one envelope definition serves plain variables (QC) as well as rotated
combinations of them (the receiving-end terms of RQC).

Sine and cosine envelopes are generated from two prototypes placed at a
center ``c`` with a sign ``sigma``, f(x) = sigma * g(x - c):

* ``tangent``: g = sin on an interval straddling 0 inside [-pi/2, pi/2],
  bounded by the tangent lines at +/- x^m/2;
* ``quadratic``: g = cos inside [-pi/2, pi/2], bounded by
  1 - k y^2 with k = (1 - cos x^m)/(x^m)^2 and by its chord.

Each row of the extended-range tables is one such placement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping

import numpy as np

Sense = Literal["<=", "==", ">="]
HALF_PI = math.pi / 2
_EPS = 1e-12


@dataclass(frozen=True)
class AffineConstraint:
    """sum(coeffs[name] * name) <sense> rhs."""

    coeffs: tuple[tuple[str, float], ...]
    sense: Sense
    rhs: float
    label: str = ""

    @staticmethod
    def make(coeffs: Mapping[str, float], sense: Sense, rhs: float, label: str = "") -> "AffineConstraint":
        items = tuple((k, float(v)) for k, v in coeffs.items() if v != 0)
        if not items:
            raise ValueError("constraint without nonzero coefficients")
        if not all(math.isfinite(v) for _, v in items) or not math.isfinite(rhs):
            raise ValueError("non-finite constraint data")
        return AffineConstraint(items, sense, float(rhs), label)

    def lhs(self, values: Mapping[str, float]) -> float:
        return sum(c * values[k] for k, c in self.coeffs)

    def violation(self, values: Mapping[str, float]) -> float:
        d = self.lhs(values) - self.rhs
        if self.sense == "<=":
            return max(d, 0.0)
        if self.sense == ">=":
            return max(-d, 0.0)
        return abs(d)

    def to_dict(self) -> dict:
        return {"coeffs": dict(self.coeffs), "sense": self.sense, "rhs": self.rhs, "label": self.label}


@dataclass(frozen=True)
class QuadraticBound:
    """sign * lifted + k * (angle - center)^2 <= rhs."""

    lifted: str
    angle: str
    sign: float
    k: float
    center: float
    rhs: float
    label: str = ""

    def violation(self, values: Mapping[str, float]) -> float:
        y = values[self.angle] - self.center
        return max(self.sign * values[self.lifted] + self.k * y * y - self.rhs, 0.0)

    def to_dict(self) -> dict:
        return {"lifted": self.lifted, "angle": self.angle, "sign": self.sign, "k": self.k,
                "center": self.center, "rhs": self.rhs, "label": self.label}


@dataclass(frozen=True)
class SquareEnvelope:
    """w >= x^2 (conic) and the secant w <= (lo+hi) x - lo*hi."""

    x: str
    w: str
    lo: float
    hi: float
    constraints: tuple[AffineConstraint, ...]
    conic: bool  # whether w >= x^2 must be imposed

    def violation(self, values: Mapping[str, float]) -> float:
        v = max((c.violation(values) for c in self.constraints), default=0.0)
        if self.conic:
            v = max(v, values[self.x] ** 2 - values[self.w])
        return v


def square_envelope(lo: float, hi: float, x: str = "x", w: str = "w") -> SquareEnvelope:
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if lo == hi:
        rows = (AffineConstraint.make({x: 1.0}, "==", lo, "sqr-fix-x"),
                AffineConstraint.make({w: 1.0}, "==", lo * lo, "sqr-fix-w"))
        return SquareEnvelope(x, w, lo, hi, rows, conic=False)
    rows = (AffineConstraint.make({w: 1.0, x: -(lo + hi)}, "<=", -lo * hi, "sqr-secant"),)
    return SquareEnvelope(x, w, lo, hi, rows, conic=True)


def trig_bounds(lo: float, hi: float) -> tuple[float, float, float, float]:
    """(sin_min, sin_max, cos_min, cos_max) over the closed interval [lo, hi]."""
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if hi - lo > 2 * math.pi + _EPS:
        raise ValueError("interval longer than a full period")

    def crit(offset: float) -> list[float]:
        k0 = math.ceil((lo - offset) / (2 * math.pi))
        pts = []
        k = k0
        while offset + 2 * math.pi * k <= hi:
            pts.append(offset + 2 * math.pi * k)
            k += 1
        return pts

    s = [math.sin(lo), math.sin(hi)]
    c = [math.cos(lo), math.cos(hi)]
    smax = 1.0 if crit(HALF_PI) else max(s)
    smin = -1.0 if crit(-HALF_PI) else min(s)
    cmax = 1.0 if crit(0.0) else max(c)
    cmin = -1.0 if crit(math.pi) else min(c)
    return smin, smax, cmin, cmax


# ---------------------------------------------------------------- sine/cosine

@dataclass(frozen=True)
class _Row:
    name: str
    kind: Literal["tangent", "quadratic", "secant-lower", "secant-upper"]
    center: float
    sigma: float
    lo_min: float
    lo_max: float
    hi_min: float
    hi_max: float

    def matches(self, lo: float, hi: float) -> bool:
        return (self.lo_min - _EPS <= lo <= self.lo_max + _EPS
                and self.hi_min - _EPS <= hi <= self.hi_max + _EPS)


P = math.pi
# Base rows valid on [-pi/2, pi/2]: the tangent pair when the interval
# straddles zero, otherwise a single chord on the side where it is valid.
_SIN_BASE = (
    _Row("sin-base-tangent", "tangent", 0.0, 1.0, -P / 2, 0.0, 0.0, P / 2),
    _Row("sin-base-nonneg", "secant-lower", 0.0, 1.0, 0.0, P / 2, 0.0, P / 2),
    _Row("sin-base-nonpos", "secant-upper", 0.0, 1.0, -P / 2, 0.0, -P / 2, 0.0),
)
_SIN_TABLE = (
    _Row("sin[-2pi,-pi]", "quadratic", -3 * P / 2, 1.0, -2 * P, -P, -2 * P, -P),
    _Row("sin[-3pi/2,-pi/2]", "tangent", -P, -1.0, -3 * P / 2, -P, -P, -P / 2),
    _Row("sin[-pi,0]", "quadratic", -P / 2, -1.0, -P, 0.0, -P, 0.0),
    _Row("sin[-pi/2,pi/2]", "tangent", 0.0, 1.0, -P / 2, 0.0, 0.0, P / 2),
    _Row("sin[0,pi]", "quadratic", P / 2, 1.0, 0.0, P, 0.0, P),
    _Row("sin[pi/2,3pi/2]", "tangent", P, -1.0, P / 2, P, P, 3 * P / 2),
    _Row("sin[pi,2pi]", "quadratic", 3 * P / 2, -1.0, P, 2 * P, P, 2 * P),
)
_COS_BASE = (
    _Row("cos-base", "quadratic", 0.0, 1.0, -P / 2, P / 2, -P / 2, P / 2),
)
_COS_TABLE = (
    _Row("cos[-2pi,-pi]", "tangent", -3 * P / 2, -1.0, -2 * P, -3 * P / 2, -3 * P / 2, -P),
    _Row("cos[-3pi/2,-pi/2]", "quadratic", -P, -1.0, -3 * P / 2, -P / 2, -3 * P / 2, -P / 2),
    _Row("cos[-pi,0]", "tangent", -P / 2, 1.0, -P, -P / 2, -P / 2, 0.0),
    _Row("cos[-pi/2,pi/2]", "quadratic", 0.0, 1.0, -P / 2, P / 2, -P / 2, P / 2),
    _Row("cos[0,pi]", "tangent", P / 2, -1.0, 0.0, P / 2, P / 2, P),
    _Row("cos[pi/2,3pi/2]", "quadratic", P, -1.0, P / 2, 3 * P / 2, P / 2, 3 * P / 2),
    _Row("cos[pi,2pi]", "tangent", 3 * P / 2, 1.0, P, 3 * P / 2, 3 * P / 2, 2 * P),
)

RowPolicy = Literal["base-first", "table-first"]


class UnsupportedInterval(ValueError):
    pass


@dataclass(frozen=True)
class TrigEnvelope:
    func: Literal["sin", "cos"]
    lifted: str
    angle: str
    lo: float
    hi: float
    row: str
    center: float
    x_m: float
    constraints: tuple[AffineConstraint, ...]
    quadratic: QuadraticBound | None = None

    def violation(self, x: float, f: float) -> float:
        values = {self.angle: x, self.lifted: f}
        v = max((c.violation(values) for c in self.constraints), default=0.0)
        if self.quadratic is not None:
            v = max(v, self.quadratic.violation(values))
        return v

    def bounds_at(self, x: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Lower and upper limits of the lifted value at angle x (no box bounds)."""
        x = np.asarray(x, dtype=float)
        lower = np.full(x.shape, -np.inf)
        upper = np.full(x.shape, np.inf)
        for c in self.constraints:
            co = dict(c.coeffs)
            a_f = co.get(self.lifted, 0.0)
            a_x = co.get(self.angle, 0.0)
            if a_f == 0:
                continue
            val = (c.rhs - a_x * x) / a_f
            le = (c.sense == "<=") == (a_f > 0)
            if c.sense == "==":
                lower = np.maximum(lower, val)
                upper = np.minimum(upper, val)
            elif le:
                upper = np.minimum(upper, val)
            else:
                lower = np.maximum(lower, val)
        q = self.quadratic
        if q is not None:
            val = (q.rhs - q.k * (x - q.center) ** 2) / q.sign
            if q.sign > 0:
                upper = np.minimum(upper, val)
            else:
                lower = np.maximum(lower, val)
        return lower, upper

    def to_dict(self) -> dict:
        return {
            "func": self.func, "lifted": self.lifted, "angle": self.angle,
            "interval": [self.lo, self.hi], "row": self.row, "center": self.center,
            "x_m": self.x_m, "constraints": [c.to_dict() for c in self.constraints],
            "quadratic": self.quadratic.to_dict() if self.quadratic else None,
        }


def _fn(func: str):
    return math.sin if func == "sin" else math.cos


def _secant(func: str, lo: float, hi: float, x: str, f: str, sense: Sense, label: str) -> AffineConstraint:
    fn = _fn(func)
    slope = (fn(hi) - fn(lo)) / (hi - lo)
    # f - slope*x  (sense)  fn(lo) - slope*lo
    return AffineConstraint.make({f: 1.0, x: -slope}, sense, fn(lo) - slope * lo, label)


def _from_row(func: str, row: _Row, lo: float, hi: float, x: str, f: str) -> TrigEnvelope:
    c, sg = row.center, row.sigma
    ylo, yhi = lo - c, hi - c
    xm = max(abs(ylo), abs(yhi))
    rows: list[AffineConstraint] = []
    quad = None
    if row.kind == "tangent":
        h = xm / 2
        ch, sh = math.cos(h), math.sin(h)
        # sin y <= ch (y - h) + sh and sin y >= ch (y + h) - sh, mapped through sigma
        up_slope, up_off = ch, -ch * h + sh
        lo_slope, lo_off = ch, ch * h - sh
        if sg < 0:
            up_slope, up_off, lo_slope, lo_off = -lo_slope, -lo_off, -up_slope, -up_off
        # f <= up_slope*(x - c) + up_off
        rows.append(AffineConstraint.make({f: 1.0, x: -up_slope}, "<=", up_off - up_slope * c, row.name + ":tangent-upper"))
        rows.append(AffineConstraint.make({f: 1.0, x: -lo_slope}, ">=", lo_off - lo_slope * c, row.name + ":tangent-lower"))
    elif row.kind == "quadratic":
        k = (1 - math.cos(xm)) / (xm * xm) if xm > 1e-8 else 0.5 - xm * xm / 24
        quad = QuadraticBound(f, x, sg, k, c, 1.0, row.name + ":quadratic")
        rows.append(_secant(func, lo, hi, x, f, ">=" if sg > 0 else "<=", row.name + ":secant"))
    elif row.kind == "secant-lower":
        rows.append(_secant(func, lo, hi, x, f, ">=", row.name + ":secant"))
    else:
        rows.append(_secant(func, lo, hi, x, f, "<=", row.name + ":secant"))
    return TrigEnvelope(func, f, x, lo, hi, row.name, c, xm, tuple(rows), quad)


def _chord_side(func: str, lo: float, hi: float) -> tuple[bool, bool]:
    """Whether f >= chord and/or f <= chord holds on [lo, hi]."""
    fn = _fn(func)
    slope = (fn(hi) - fn(lo)) / (hi - lo)
    # interior extrema of f - chord sit where f' = slope
    if func == "sin":
        base = [math.acos(max(-1.0, min(1.0, slope))), -math.acos(max(-1.0, min(1.0, slope)))]
    else:
        a = math.asin(max(-1.0, min(1.0, -slope)))
        base = [a, math.pi - a]
    gaps = []
    for b0 in base:
        k = math.ceil((lo - b0) / (2 * math.pi))
        while b0 + 2 * math.pi * k <= hi:
            t = b0 + 2 * math.pi * k
            gaps.append(fn(t) - (fn(lo) + slope * (t - lo)))
            k += 1
    tol = 1e-12
    return all(g >= -tol for g in gaps), all(g <= tol for g in gaps)


def _fallback(func: str, lo: float, hi: float, x: str, f: str) -> TrigEnvelope:
    smin, smax, cmin, cmax = trig_bounds(lo, hi)
    fmin, fmax = (smin, smax) if func == "sin" else (cmin, cmax)
    rows = [AffineConstraint.make({f: 1.0}, ">=", fmin, "fallback:box-lower"),
            AffineConstraint.make({f: 1.0}, "<=", fmax, "fallback:box-upper")]
    above, below = _chord_side(func, lo, hi)
    if above:
        rows.append(_secant(func, lo, hi, x, f, ">=", "fallback:secant"))
    elif below:
        rows.append(_secant(func, lo, hi, x, f, "<=", "fallback:secant"))
    return TrigEnvelope(func, f, x, lo, hi, "fallback", 0.0, max(abs(lo), abs(hi)), tuple(rows))


def _envelope(func: str, lo: float, hi: float, x: str, f: str,
              policy: RowPolicy, fallback: bool) -> TrigEnvelope:
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    if lo == hi:
        val = _fn(func)(lo)
        rows = (AffineConstraint.make({f: 1.0}, "==", val, f"{func}-fixed"),
                AffineConstraint.make({x: 1.0}, "==", lo, f"{func}-fixed-angle"))
        return TrigEnvelope(func, f, x, lo, hi, "degenerate", lo, 0.0, rows)
    base, table = (_SIN_BASE, _SIN_TABLE) if func == "sin" else (_COS_BASE, _COS_TABLE)
    order = base + table if policy == "base-first" else table + base
    for row in order:
        if row.matches(lo, hi):
            return _from_row(func, row, lo, hi, x, f)
    if fallback:
        return _fallback(func, lo, hi, x, f)
    raise UnsupportedInterval(
        f"no {func} envelope row covers [{math.degrees(lo):.4f}, {math.degrees(hi):.4f}] deg")


def sine_envelope(lo: float, hi: float, x: str = "x", lifted: str = "S",
                  policy: RowPolicy = "base-first", fallback: bool = False) -> TrigEnvelope:
    return _envelope("sin", lo, hi, x, lifted, policy, fallback)


def cosine_envelope(lo: float, hi: float, x: str = "x", lifted: str = "C",
                    policy: RowPolicy = "base-first", fallback: bool = False) -> TrigEnvelope:
    return _envelope("cos", lo, hi, x, lifted, policy, fallback)


def envelope_rows(func: Literal["sin", "cos"]) -> tuple[_Row, ...]:
    """Every supported row of a function, base rows first."""
    return (_SIN_BASE + _SIN_TABLE) if func == "sin" else (_COS_BASE + _COS_TABLE)


# ---------------------------------------------------------------- hulls

@dataclass(frozen=True)
class ExtremePointHull:
    """Convex combination of extreme points of a multilinear graph.

    ``points[k]`` lists the coordinates of extreme point k (in the order of
    ``coords``) and ``products[k]`` the monomial values at it (in the order
    of ``product_names``).
    """

    coords: tuple[str, ...]
    product_names: tuple[str, ...]
    weights: tuple[str, ...]
    points: np.ndarray
    products: np.ndarray

    def rows(self) -> list[AffineConstraint]:
        out = [AffineConstraint.make({w: 1.0 for w in self.weights}, "==", 1.0, "hull:simplex")]
        for j, name in enumerate(self.coords):
            coeffs = {name: 1.0}
            for w, v in zip(self.weights, self.points[:, j]):
                coeffs[w] = coeffs.get(w, 0.0) - v
            out.append(AffineConstraint.make(coeffs, "==", 0.0, f"hull:coord:{name}"))
        for j, name in enumerate(self.product_names):
            coeffs = {name: 1.0}
            for w, v in zip(self.weights, self.products[:, j]):
                coeffs[w] = coeffs.get(w, 0.0) - v
            out.append(AffineConstraint.make(coeffs, "==", 0.0, f"hull:product:{name}"))
        return out


def trilinear_hull(vl: tuple[float, float], vm: tuple[float, float], t: tuple[float, float],
                   names: tuple[str, str, str], product: str, weight_prefix: str) -> ExtremePointHull:
    """Hull of p = V_l * V_m * T over a box.

    Extreme points are ordered lexicographically in (V_l, V_m, T), low
    before high, so points 2i and 2i+1 share the (V_l, V_m) corner i of
    (lo,lo), (lo,hi), (hi,lo), (hi,hi).
    """
    for lo, hi in (vl, vm, t):
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ValueError("trilinear hull needs finite, ordered bounds")
    pts = np.array([(a, b, c) for a in vl for b in vm for c in t], dtype=float)
    prods = (pts[:, 0] * pts[:, 1] * pts[:, 2])[:, None]
    weights = tuple(f"{weight_prefix}[{k}]" for k in range(8))
    return ExtremePointHull(names, (product,), weights, pts, prods)


def linking_constraint(lam: ExtremePointHull, gam: ExtremePointHull) -> AffineConstraint:
    """Both hulls must agree on the weight of every (V_l, V_m) corner product."""
    if len(lam.weights) != 8 or len(gam.weights) != 8:
        raise ValueError("linking needs two 8-point trilinear hulls")
    if not np.array_equal(lam.points[:, :2], gam.points[:, :2]):
        raise ValueError("hull vertex orderings do not match")
    coeffs: dict[str, float] = {}
    for g in range(4):
        corner = lam.points[2 * g, 0] * lam.points[2 * g, 1]
        for k in (2 * g, 2 * g + 1):
            coeffs[lam.weights[k]] = coeffs.get(lam.weights[k], 0.0) + corner
            coeffs[gam.weights[k]] = coeffs.get(gam.weights[k], 0.0) - corner
    coeffs = {k: v for k, v in coeffs.items() if v != 0}
    if not coeffs:
        # degenerate voltage box: every weight carries the same product
        return AffineConstraint((), "==", 0.0, "link")
    return AffineConstraint.make(coeffs, "==", 0.0, "link")


# ---------------------------------------------------------------- dominance

@dataclass(frozen=True)
class DominanceVerdict:
    verdict: Literal["LowerBoundaryTighter", "UpperBoundaryTighter", "ConditionsNotMet"]
    critical_points: int
    f_mid: float
    reason: str = ""


def chord_gap(theta: float | np.ndarray, lo: float, hi: float, delta: float):
    """cos(theta - delta) minus its chord through the interval endpoints."""
    slope = (math.cos(hi - delta) - math.cos(lo - delta)) / (hi - lo)
    return np.cos(np.asarray(theta) - delta) - math.cos(hi - delta) - slope * (np.asarray(theta) - hi)


def dominance_test(theta_lo: float, theta_hi: float, delta: float) -> DominanceVerdict:
    """Decide which boundary of the rotated cosine envelope is the tighter one.

    The chord of cos(theta - delta) is the lower boundary when the curve stays
    above it, i.e. when the derivative of the gap vanishes exactly once
    inside the interval and the gap is positive at the midpoint.
    """
    if not theta_lo < theta_hi:
        raise ValueError("theta_lo must be smaller than theta_hi")
    q = (math.cos(theta_lo - delta) - math.cos(theta_hi - delta)) / (theta_hi - theta_lo)
    mid = 0.5 * (theta_lo + theta_hi)
    f_mid = float(chord_gap(mid, theta_lo, theta_hi, delta))
    if abs(q) > 1:
        return DominanceVerdict("ConditionsNotMet", 0, f_mid, "secant slope exceeds 1 in magnitude")
    # zeros of d/dtheta: sin(theta - delta) = q
    a = math.asin(q)
    count = 0
    span = theta_hi - theta_lo
    kmin = math.floor((theta_lo - delta - math.pi) / math.pi) - 1
    kmax = math.ceil((theta_hi - delta + math.pi) / math.pi) + 1
    for k in range(kmin, kmax + 1):
        z = delta + (-1) ** (k % 2) * a + math.pi * k
        if theta_lo + 1e-12 * span < z < theta_hi - 1e-12 * span:
            count += 1
    if count == 1 and f_mid > 0:
        return DominanceVerdict("LowerBoundaryTighter", count, f_mid)
    if count == 1 and f_mid < 0:
        return DominanceVerdict("UpperBoundaryTighter", count, f_mid)
    return DominanceVerdict("ConditionsNotMet", count, f_mid,
                            f"{count} critical points, gap at midpoint {f_mid:.3g}")


def dump_json(items: Iterable[TrigEnvelope]) -> str:
    return json.dumps([e.to_dict() for e in items], indent=2, sort_keys=True)
