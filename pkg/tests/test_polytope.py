"""Sending/receiving polytope intersection against a brute-force oracle."""

import itertools
import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from rqcopf.caseio import Branch
from rqcopf.envelopes import trig_bounds
from rqcopf.polytope import (EmptyIntersection, barycentric_weights, halfplanes,
                             intersect_trig_polytopes, polygon_area, quadrilinear_hull, arc_inside)
from rqcopf.rotation import TerminalRelation, terminal_relation

rng = np.random.default_rng(11)


def boxes(lo, hi, dh):
    """Sending box of (cos, sin)(u - dh) and receiving box of (cos, sin)(u + dh), u in [lo, hi]."""
    s_min, s_max, c_min, c_max = trig_bounds(lo - dh, hi - dh)
    rs_min, rs_max, rc_min, rc_max = trig_bounds(lo + dh, hi + dh)
    return (c_min, c_max, s_min, s_max), (rc_min, rc_max, rs_min, rs_max)


def relation(dh):
    c, s = math.cos(dh), math.sin(dh)
    return TerminalRelation(c * c - s * s, 2 * c * s, dh)


def brute_force(sending, receiving, rel):
    """Every pairwise line intersection that satisfies all eight sides, hulled."""
    A, b = halfplanes(sending, receiving, rel)
    pts = []
    for i, j in itertools.combinations(range(8), 2):
        M = A[[i, j]]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        p = np.linalg.solve(M, b[[i, j]])
        if np.all(A @ p - b <= 1e-10):
            pts.append(p)
    # merge near-duplicates by distance; rounding can split a point across a digit boundary
    merged: list[np.ndarray] = []
    for p in pts:
        if all(np.linalg.norm(p - q) > 1e-10 for q in merged):
            merged.append(p)
    pts = np.array(merged)
    if len(pts) < 3:
        return pts
    hull = ConvexHull(pts)
    return pts[hull.vertices]


def same_vertex_set(a, b, tol):
    if len(a) != len(b):
        return False
    return all(np.min(np.linalg.norm(b - p, axis=1)) <= tol for p in a)


def random_config():
    lo = rng.uniform(-math.pi / 2, math.pi / 2 - 0.05)
    hi = rng.uniform(lo + 0.02, math.pi / 2)
    dh = rng.uniform(-math.pi, math.pi)
    return lo, hi, dh


def test_matches_brute_force_oracle():
    done = 0
    while done < 500:
        lo, hi, dh = random_config()
        s, r = boxes(lo, hi, dh)
        rel = relation(dh)
        try:
            poly = intersect_trig_polytopes(s, r, rel)
        except EmptyIntersection:
            continue
        oracle = brute_force(s, r, rel)
        if len(oracle) < 3:
            continue
        assert same_vertex_set(poly.vertices, oracle, 1e-9), (lo, hi, dh, poly.vertices, oracle)
        done += 1


def test_arc_stays_inside_polytope():
    for _ in range(200):
        lo, hi, dh = random_config()
        s, r = boxes(lo, hi, dh)
        poly = intersect_trig_polytopes(s, r, relation(dh))
        assert arc_inside(poly, lo - dh, hi - dh) <= 1e-12


def test_vertex_count_and_orientation():
    for _ in range(200):
        lo, hi, dh = random_config()
        s, r = boxes(lo, hi, dh)
        poly = intersect_trig_polytopes(s, r, relation(dh))
        assert 3 <= poly.n <= 8
        v = poly.vertices
        signed = 0.5 * np.sum(v[:, 0] * np.roll(v[:, 1], -1) - v[:, 1] * np.roll(v[:, 0], -1))
        assert signed > 0
        assert polygon_area(v) == pytest.approx(signed)


def test_terminal_relation_from_branch_matches():
    br = Branch(1, 2, 0.02, 0.3)
    rel = terminal_relation(br, 0.4)
    ref = relation(br.delta + 0.4)
    assert (rel.alpha, rel.beta) == pytest.approx((ref.alpha, ref.beta))


def test_disjoint_boxes_raise():
    with pytest.raises(EmptyIntersection):
        intersect_trig_polytopes((0.9, 1.0, 0.0, 0.1), (-1.0, -0.9, -0.1, 0.0), relation(0.0))


def test_barycentric_weights_reproduce_points():
    lo, hi, dh = 0.1, 1.0, 0.3
    s, r = boxes(lo, hi, dh)
    poly = intersect_trig_polytopes(s, r, relation(dh))
    for _ in range(100):
        w = rng.dirichlet(np.ones(poly.n))
        p = w @ poly.vertices
        got = barycentric_weights(poly.vertices, p)
        assert got.min() >= 0 and got.sum() == pytest.approx(1.0)
        assert got @ poly.vertices == pytest.approx(p, abs=1e-12)


def test_quadrilinear_hull_size():
    s, r = boxes(0.0, 0.5, 0.2)
    poly = intersect_trig_polytopes(s, r, relation(0.2))
    h = quadrilinear_hull((0.9, 1.1), (0.9, 1.1), poly, ("a", "b", "c", "s"), ("cc", "ss"), "lam")
    assert len(h.weights) == 4 * poly.n


# ---------------------------------------------------------------- closed forms

def closed_forms(send, recv, alpha, beta):
    """Intersection coordinates as tabulated in closed form, keyed by segment pair.

    Sending sides: AB is S = S_hi, BC is C = C_lo, CD is S = S_lo, AD is C = C_hi.
    Receiving sides: A'B' is S_r = S_r_hi, B'C' is C_r = C_r_lo, C'D' is S_r = S_r_lo,
    A'D' is C_r = C_r_hi. ``beta`` follows the tabulated sign convention.
    """
    c_lo, c_hi, s_lo, s_hi = send
    cr_lo, cr_hi, sr_lo, sr_hi = recv
    a, b = alpha, beta
    out = {}
    for name, sr in (("A'B'", sr_hi), ("C'D'", sr_lo)):
        out[(name, "AB")] = (a / b * s_hi - b * sr - a * a * sr / b, s_hi)
        out[(name, "CD")] = (a / b * s_lo - b * sr - a * a * sr / b, s_lo)
        out[(name, "BC")] = (c_lo, b * c_lo / a + b * b * sr / a + a * sr)
        out[(name, "AD")] = (c_hi, b * c_hi / a + b * b * sr / a + a * sr)
    for name, cr in (("B'C'", cr_lo), ("A'D'", cr_hi)):
        out[(name, "AB")] = (-b / a * s_hi + a * cr + b * b * cr / a, s_hi)
        out[(name, "CD")] = (-b / a * s_lo + a * cr + b * b * cr / a, s_lo)
        out[(name, "BC")] = (c_lo, -a * c_lo / b + a * a * cr / b + b * cr)
        out[(name, "AD")] = (c_hi, -a * c_hi / b + a * a * cr / b + b * cr)
    return out


BANDS = {  # psi band (deg) -> segment pairs listed for A'B', B'C', C'D', A'D'
    (-45, 0): [("A'B'", "AB"), ("A'B'", "BC"), ("B'C'", "BC"), ("B'C'", "CD"),
               ("C'D'", "CD"), ("C'D'", "AD"), ("A'D'", "AB"), ("A'D'", "AD")],
    (-90, -45): [("A'B'", "BC"), ("A'B'", "CD"), ("B'C'", "CD"), ("B'C'", "AD"),
                 ("C'D'", "AB"), ("C'D'", "AD"), ("A'D'", "AB"), ("A'D'", "BC")],
    (0, 45): [("A'B'", "AD"), ("A'B'", "AB"), ("B'C'", "AB"), ("B'C'", "BC"),
              ("C'D'", "BC"), ("C'D'", "CD"), ("A'D'", "CD"), ("A'D'", "AD")],
    (45, 90): [("A'B'", "CD"), ("A'B'", "AD"), ("B'C'", "AD"), ("B'C'", "AB"),
               ("C'D'", "AB"), ("C'D'", "BC"), ("A'D'", "BC"), ("A'D'", "CD")],
}


def test_closed_forms_are_the_side_intersections():
    """Each tabulated point lies on both named sides (tabulated beta = -ours)."""
    A_rows = {"AB": 3, "BC": 0, "CD": 2, "AD": 1, "A'B'": 7, "B'C'": 4, "C'D'": 6, "A'D'": 5}
    for _ in range(200):
        lo, hi, dh = random_config()
        s, r = boxes(lo, hi, dh)
        rel = relation(dh)
        if min(abs(rel.alpha), abs(rel.beta)) < 1e-3:
            continue
        A, b = halfplanes(s, r, rel)
        for (rs, ss), p in closed_forms(s, r, rel.alpha, -rel.beta).items():
            for side in (rs, ss):
                i = A_rows[side]
                assert A[i] @ np.array(p) == pytest.approx(b[i], abs=1e-9), (rs, ss, side)


def test_closed_forms_match_clipped_vertices_in_bands():
    """Within each psi band, tabulated points that are feasible are polytope vertices."""
    matched = 0
    for (lo_deg, hi_deg), pairs in BANDS.items():
        for _ in range(60):
            psi = math.radians(rng.uniform(lo_deg + 1, hi_deg - 1))
            lo = rng.uniform(-math.pi / 2, 0.3)
            hi = rng.uniform(lo + 0.05, math.pi / 2)
            s, r = boxes(lo, hi, psi)
            rel = relation(psi)
            poly = intersect_trig_polytopes(s, r, rel)
            A, b = halfplanes(s, r, rel)
            forms = closed_forms(s, r, rel.alpha, -rel.beta)
            for pair in pairs:
                p = np.array(forms[pair])
                if np.all(A @ p - b <= 1e-10):
                    assert np.min(np.linalg.norm(poly.vertices - p, axis=1)) <= 1e-9
                    matched += 1
    assert matched > 0
