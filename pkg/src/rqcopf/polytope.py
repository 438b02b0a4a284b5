"""Intersection of the sending- and receiving-end trigonometric boxes.

Points live in the (C, S) plane of the sending-end terms
C = cos(phi), S = sin(phi). The receiving-end terms are the rotation
Cr = alpha*C - beta*S, Sr = beta*C + alpha*S, so a box on (Cr, Sr) is a
rotated square in the (C, S) plane. The intersection is found by clipping
the sending box against the four receiving half-planes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .envelopes import ExtremePointHull
from .rotation import TerminalRelation

Box = tuple[float, float, float, float]  # (c_lo, c_hi, s_lo, s_hi)
MERGE_TOL = 1e-9


class EmptyIntersection(ValueError):
    pass


@dataclass(frozen=True)
class TrigPolytope:
    vertices: np.ndarray  # (N, 2), counterclockwise
    sending: Box
    receiving: Box
    relation: TerminalRelation

    @property
    def n(self) -> int:
        return len(self.vertices)

    def halfplanes(self) -> tuple[np.ndarray, np.ndarray]:
        """(A, b) with A @ [C, S] <= b describing all eight sides."""
        return halfplanes(self.sending, self.receiving, self.relation)

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist(), "sending": list(self.sending),
                "receiving": list(self.receiving),
                "alpha": self.relation.alpha, "beta": self.relation.beta}


def halfplanes(sending: Box, receiving: Box, rel: TerminalRelation) -> tuple[np.ndarray, np.ndarray]:
    a, b = rel.alpha, rel.beta
    c_lo, c_hi, s_lo, s_hi = sending
    cr_lo, cr_hi, sr_lo, sr_hi = receiving
    A = np.array([[-1, 0], [1, 0], [0, -1], [0, 1],
                  [-a, b], [a, -b], [-b, -a], [b, a]], dtype=float)
    rhs = np.array([-c_lo, c_hi, -s_lo, s_hi, -cr_lo, cr_hi, -sr_lo, sr_hi], dtype=float)
    return A, rhs


def _clip(poly: list[np.ndarray], n: np.ndarray, r: float) -> list[np.ndarray]:
    """Keep the part of a convex polygon with n . p <= r."""
    out: list[np.ndarray] = []
    m = len(poly)
    for i in range(m):
        p, q = poly[i], poly[(i + 1) % m]
        dp, dq = n @ p - r, n @ q - r
        if dp <= 0:
            out.append(p)
        if (dp < 0 < dq) or (dq < 0 < dp):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    return out


def _clean(poly: list[np.ndarray]) -> list[np.ndarray]:
    pts: list[np.ndarray] = []
    for p in poly:
        if not pts or np.max(np.abs(p - pts[-1])) > MERGE_TOL:
            pts.append(p)
    while len(pts) > 1 and np.max(np.abs(pts[0] - pts[-1])) <= MERGE_TOL:
        pts.pop()
    # drop vertices lying on the segment between their neighbours
    changed = True
    while changed and len(pts) > 2:
        changed = False
        for i in range(len(pts)):
            a, b, c = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            scale = max(np.linalg.norm(c - a), 1e-300)
            if abs(cross) / scale <= MERGE_TOL:
                pts.pop(i)
                changed = True
                break
    return pts


def intersect_trig_polytopes(sending: Box, receiving: Box, relation: TerminalRelation) -> TrigPolytope:
    c_lo, c_hi, s_lo, s_hi = sending
    if c_lo > c_hi or s_lo > s_hi or receiving[0] > receiving[1] or receiving[2] > receiving[3]:
        raise EmptyIntersection("a bound box is empty")
    poly = [np.array(p, dtype=float) for p in
            ((c_lo, s_lo), (c_hi, s_lo), (c_hi, s_hi), (c_lo, s_hi))]
    A, rhs = halfplanes(sending, receiving, relation)
    for n, r in zip(A[4:], rhs[4:]):
        poly = _clip(poly, n, r)
        if not poly:
            break
    poly = _clean(poly)
    if not poly:
        raise EmptyIntersection(
            f"sending box {sending} and receiving box {receiving} do not intersect")
    verts = np.array(poly)
    # every vertex must satisfy all sides; a tiny violation means the
    # region collapsed below the merge tolerance
    if np.max(A @ verts.T - rhs[:, None]) > 1e-9:
        raise EmptyIntersection("intersection collapsed numerically")
    return TrigPolytope(verts, tuple(sending), tuple(receiving), relation)


def quadrilinear_hull(vl: tuple[float, float], vm: tuple[float, float], poly: TrigPolytope,
                      names: tuple[str, str, str, str], products: tuple[str, str],
                      weight_prefix: str) -> ExtremePointHull:
    """Hull of (V_l V_m C, V_l V_m S) over [vl] x [vm] x polytope.

    ``names`` are (V_l, V_m, C, S); ``products`` are (c, s).
    """
    pts = np.array([(a, b, c, s) for a in vl for b in vm for (c, s) in poly.vertices], dtype=float)
    prods = np.column_stack([pts[:, 0] * pts[:, 1] * pts[:, 2], pts[:, 0] * pts[:, 1] * pts[:, 3]])
    weights = tuple(f"{weight_prefix}[{k}]" for k in range(len(pts)))
    return ExtremePointHull(names, products, weights, pts, prods)


def barycentric_weights(poly: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Convex weights on the vertices of a convex polygon reproducing point p.

    Uses a fan triangulation from vertex 0; falls back to the nearest
    triangle when p sits on the boundary up to rounding.
    """
    n = len(poly)
    w = np.zeros(n)
    if n == 1:
        w[0] = 1.0
        return w
    if n == 2:
        d = poly[1] - poly[0]
        t = float(np.clip((p - poly[0]) @ d / (d @ d), 0.0, 1.0))
        w[0], w[1] = 1 - t, t
        return w
    best = None
    for i in range(1, n - 1):
        T = np.column_stack([poly[i] - poly[0], poly[i + 1] - poly[0]])
        try:
            u, v = np.linalg.solve(T, p - poly[0])
        except np.linalg.LinAlgError:
            continue
        lam = np.array([1 - u - v, u, v])
        worst = lam.min()
        if best is None or worst > best[0]:
            best = (worst, i, lam)
    _, i, lam = best
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    w[0], w[i], w[i + 1] = lam
    return w


def polygon_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def arc_inside(poly: TrigPolytope, lo: float, hi: float, samples: int = 200) -> float:
    """Largest side violation of (cos phi, sin phi) for phi in [lo, hi]."""
    A, rhs = poly.halfplanes()
    phi = np.linspace(lo, hi, samples)
    pts = np.vstack([np.cos(phi), np.sin(phi)])
    return float(np.max(A @ pts - rhs[:, None]))
