"""Acceptance suite: one test and one PASS/FAIL line per criterion.

The lines are collected in ``RESULTS`` and printed in the terminal summary
(see conftest.py), so ``pytest -v`` output ends with the full scorecard.
Criteria that depend on case files absent from data/pglib fail with a
reason instead of being skipped.
"""

from __future__ import annotations

import dataclasses as dc
import math
import time
from functools import lru_cache

import numpy as np
import pytest

from rqcopf import envelopes as env
from rqcopf.builders import build, optimality_gap, point_cost, solve_relaxation
from rqcopf.caseio import load_case
from rqcopf.cli import main as cli_main
from rqcopf.conic import solve, solve_external
from rqcopf.envelopes import dominance_test, envelope_rows, square_envelope
from rqcopf.experiments import load_manifest, parse_psi_range, sweep
from rqcopf.localopf import solve_local
from rqcopf.polytope import EmptyIntersection, halfplanes, intersect_trig_polytopes
from rqcopf.rotation import OperatingPoint, inverse_rotation, rectangular_flows, rotate, rotated_flows

from conftest import DATA, cached_case, cached_local
from lifting import lift, residuals
from synthetic import synthetic_case_text
from test_envelopes import sampled_verdict
from test_polytope import BANDS, boxes, brute_force, closed_forms, relation, same_vertex_set
from test_rotation import phasor_flows

RESULTS: dict[int, tuple[bool, str]] = {}
KKT: list[tuple[str, float]] = []          # (label, max KKT residual) of every Optimal report here

TABLE_COLUMNS = ("qc", "rqc0", "rqc80", "trqc80")
TABLE_TOL_PP = 0.3
CRIT1_CASES = ("case3_lmbd", "case14_ieee__sad", "case24_ieee_rts__sad", "case30_ieee")


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = (ok, detail)


def note_kkt(label: str, report) -> None:
    if report is not None and report.status == "Optimal":
        KKT.append((label, report.max_kkt))


@lru_cache(maxsize=None)
def manifest():
    return {e.name: e for e in load_manifest(DATA / "manifest.json")}


@lru_cache(maxsize=None)
def case3_sweep(kind: str):
    e = manifest()["case3_lmbd"]
    return sweep(load_case(e.file), kind, parse_psi_range("-90:90:1"), e.local, e.source)


def fold90(psi: float) -> float:
    """Representative of psi modulo 90 degrees in (-45, 45]."""
    r = (psi + 45.0) % 90.0 - 45.0
    return 45.0 if r == -45.0 else r


# ---------------------------------------------------------------- 1

def test_criterion_1_table_reproduction():
    t0 = time.perf_counter()
    ok, parts, missing = True, [], []
    for name in CRIT1_CASES:
        e = manifest()[name]
        if not e.file.is_file():
            missing.append(name)
            continue
        case = load_case(e.file)
        worst = 0.0
        for col, kind, psi in (("qc", "qc", 0.0), ("rqc0", "rqc", 0.0), ("rqc80", "rqc", 80.0),
                               ("trqc80", "trqc", 80.0)):
            r = solve_relaxation(case, kind, math.radians(psi))
            note_kkt(f"{name}:{col}", r.report)
            gap = 100 * optimality_gap(e.local, r.objective) if r.status == "Optimal" else math.nan
            dev = abs(gap - e.reference[col])
            worst = max(worst, dev) if math.isfinite(dev) else math.inf
        ok &= worst <= TABLE_TOL_PP
        parts.append(f"{name} max deviation {worst:.3f} pp")
    elapsed = time.perf_counter() - t0
    if missing:
        ok = False
        parts.append("case file missing: " + ", ".join(missing))
    record(1, ok, "; ".join(parts) + f"; {elapsed:.1f} s")
    assert not missing, f"PGLib case files not in data/pglib: {missing}"
    assert ok and elapsed < 120


# ---------------------------------------------------------------- 2

def test_criterion_2_psi_star():
    t0 = time.perf_counter()
    sw = case3_sweep("rqc")
    elapsed = time.perf_counter() - t0
    star, gmin = sw.psi_star, 100 * sw.min_gap
    # the gap curve is periodic in psi with period 90 deg up to solver noise;
    # every grid point that attains the minimum counts
    ties = sw.psi_deg[np.isclose(sw.gap, sw.min_gap, rtol=0, atol=1e-9)]
    near = min(abs(fold90(float(p) - (-81.0))) for p in ties)
    ok = near <= 3.0 and gmin <= 0.82 and elapsed < 900
    record(2, ok, f"argmin psi {star:g} deg (tied minima {ties.tolist()}), distance to -81 mod 90 "
                  f"{near:g} deg, min gap {gmin:.4f}%, {elapsed:.0f} s")
    assert ok


# ---------------------------------------------------------------- 3

def test_criterion_3_ordering():
    worst, pairs, failed = -math.inf, 0, 0
    rq, tq = case3_sweep("rqc"), case3_sweep("trqc")
    diffs = [tq.gap - rq.gap]
    grid = parse_psi_range("-90:90:10")
    for name in ("case5_pjm", "case14_ieee"):
        case, loc = cached_case(name), cached_local(name).objective
        a = sweep(case, "rqc", grid, loc)
        b = sweep(case, "trqc", grid, loc)
        diffs.append(b.gap - a.gap)
    d = np.concatenate(diffs)
    solved = np.isfinite(d)
    pairs, failed = int(solved.sum()), int((~solved).sum())
    worst = float(np.max(d[solved]))
    ordering_ok = worst <= 1e-6 and failed == 0

    direction, missing = [], []
    for name in CRIT1_CASES:
        e = manifest()[name]
        if not e.file.is_file():
            missing.append(name)
            continue
        case = load_case(e.file)
        q = solve_relaxation(case, "qc")
        r = solve_relaxation(case, "rqc", math.radians(80))
        direction.append((name, r.objective > q.objective))
    extra = []
    for name in ("case5_pjm", "case14_ieee"):
        case = cached_case(name)
        q = solve_relaxation(case, "qc").objective
        r = solve_relaxation(case, "rqc", math.radians(80)).objective
        extra.append(f"{name} {'yes' if r > q else 'no'}")
    direction_ok = all(v for _, v in direction) and not missing
    detail = (f"TRQC - RQC gap max {worst:.2e} over {pairs} solved pairs ({failed} unsolved); "
              f"RQC(80) < QC on {', '.join(f'{n} {v}' for n, v in direction)}"
              + (f"; case file missing: {', '.join(missing)}" if missing else "")
              + f"; extra cases RQC(80) < QC: {', '.join(extra)}")
    record(3, ordering_ok and direction_ok, detail)
    assert ordering_ok
    assert not missing, f"PGLib case files not in data/pglib: {missing}"
    assert direction_ok


# ---------------------------------------------------------------- 4

def perturbed_variants(rng, n_per_case=10):
    out = []
    for name in ("case3_lmbd", "case5_pjm"):
        base = cached_case(name)
        made = 0
        while made < n_per_case:
            f = rng.uniform(0.8, 1.1, len(base.buses))
            case = dc.replace(base, buses=tuple(dc.replace(b, p_demand=b.p_demand * x, q_demand=b.q_demand * x)
                                                for b, x in zip(base.buses, f)))
            sol = solve_local(case)
            if not sol.success:
                continue
            out.append((f"{name}#{made}", case, sol.point))
            made += 1
    return out


def test_criterion_4_soundness():
    rng = np.random.default_rng(4)
    worst_margin, worst_res, n_checks = -math.inf, 0.0, 0
    failures = []
    for label, case, point in perturbed_variants(rng):
        cost = point_cost(case, point)
        psi = math.radians(float(rng.uniform(-90, 90)))
        for kind in ("qc", "rqc", "trqc"):
            p = 0.0 if kind == "qc" else psi
            prog, vmap = build(case, kind, p)
            rep = solve(prog)
            note_kkt(f"{label}:{kind}", rep)
            if rep.status != "Optimal":
                failures.append(f"{label} {kind} {rep.status}")
                continue
            worst_margin = max(worst_margin, rep.primal_objective - cost)
            res = max(residuals(prog, lift(prog, vmap, case, kind, p, point)).values())
            worst_res = max(worst_res, res)
            n_checks += 1
    ok = not failures and worst_margin <= 1e-6 and worst_res <= 1e-7 and n_checks == 60
    record(4, ok, f"20 variants x 3 relaxations: max(bound - cost) {worst_margin:.3g}, "
                  f"max lifted residual {worst_res:.2e}" + (f"; failures {failures}" if failures else ""))
    assert ok


# ---------------------------------------------------------------- 5

def test_criterion_5_envelopes():
    rng = np.random.default_rng(5)
    worst, rows = 0.0, 0
    for func, fn in (("sin", np.sin), ("cos", np.cos)):
        for row in envelope_rows(func):
            rows += 1
            draws = [(row.lo_min, row.hi_max)]
            while len(draws) < 20:
                lo, hi = rng.uniform(row.lo_min, row.lo_max), rng.uniform(row.hi_min, row.hi_max)
                if hi - lo > 1e-6:
                    draws.append((lo, hi))
            for lo, hi in draws:
                e = env._from_row(func, row, lo, hi, "x", "f")
                xs = np.concatenate([[lo, hi], rng.uniform(lo, hi, 10_000)])
                lower, upper = e.bounds_at(xs)
                worst = max(worst, float(np.max(lower - fn(xs))), float(np.max(fn(xs) - upper)))
    # voltage-square envelope
    for _ in range(20):
        lo, hi = sorted(rng.uniform(0.8, 1.2, 2))
        sq = square_envelope(lo, hi)
        xs = np.concatenate([[lo, hi], rng.uniform(lo, hi, 10_000)])
        worst = max(worst, max(sq.violation({"x": x, "w": x * x}) for x in xs.tolist()))
    ok = worst <= 1e-10
    record(5, ok, f"{rows} table rows + square envelope, 20 intervals x 1e4 samples each, "
                  f"max violation {worst:.2e}")
    assert ok


# ---------------------------------------------------------------- 6

def test_criterion_6_geometry():
    rng = np.random.default_rng(6)
    done, worst = 0, 0.0
    while done < 500:
        lo = rng.uniform(-math.pi / 2, math.pi / 2 - 0.05)
        hi = rng.uniform(lo + 0.02, math.pi / 2)
        dh = rng.uniform(-math.pi, math.pi)
        s, r = boxes(lo, hi, dh)
        rel = relation(dh)
        try:
            poly = intersect_trig_polytopes(s, r, rel)
        except EmptyIntersection:
            continue
        oracle = brute_force(s, r, rel)
        if len(oracle) < 3:
            continue
        assert same_vertex_set(poly.vertices, oracle, 1e-9), (lo, hi, dh)
        worst = max(worst, max(float(np.min(np.linalg.norm(oracle - p, axis=1))) for p in poly.vertices))
        done += 1
    matched, closed_worst = 0, 0.0
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
                    closed_worst = max(closed_worst, float(np.min(np.linalg.norm(poly.vertices - p, axis=1))))
                    matched += 1
    ok = worst <= 1e-9 and closed_worst <= 1e-9 and matched > 0
    record(6, ok, f"500 brute-force configs max vertex distance {worst:.1e}; {matched} closed-form "
                  f"vertices in 4 psi bands, max distance {closed_worst:.1e}")
    assert ok


# ---------------------------------------------------------------- 7

def test_criterion_7_dominance():
    rng = np.random.default_rng(7)
    checked = disagree = 0
    for _ in range(1000):
        delta = rng.uniform(-math.pi, math.pi)
        lo = rng.uniform(-math.pi, math.pi)
        hi = lo + rng.uniform(0.01, math.pi)
        v = dominance_test(lo, hi, delta)
        if v.verdict != "ConditionsNotMet":
            checked += 1
            disagree += sampled_verdict(lo, hi, delta) != v.verdict
    canon_bad = 0
    for _ in range(1000):
        delta = rng.uniform(-math.pi / 2, math.pi / 2)
        a, b = max(-math.pi / 2, -math.pi / 2 + delta), min(math.pi / 2, math.pi / 2 + delta)
        lo, hi = sorted(rng.uniform(a, b, 2))
        if hi - lo < 1e-6:
            continue
        canon_bad += dominance_test(lo, hi, delta).verdict != "LowerBoundaryTighter"
    ok = disagree == 0 and canon_bad == 0 and checked > 0
    record(7, ok, f"{checked}/1000 tighter-boundary verdicts, {disagree} disagree with sampling; "
                  f"canonical range violations {canon_bad}/1000")
    assert ok


# ---------------------------------------------------------------- 8

def test_criterion_8_rotation():
    from test_rotation import random_branch
    rng = np.random.default_rng(8)
    worst_flow = worst_oracle = worst_inj = 0.0
    for _ in range(1000):
        br = random_branch()
        pt = OperatingPoint({1: rng.uniform(0.9, 1.1), 2: rng.uniform(0.9, 1.1)},
                            {1: rng.uniform(-0.6, 0.6), 2: rng.uniform(-0.6, 0.6)}, (), ())
        psi = rng.uniform(-math.pi, math.pi)
        p1, q1, p2, q2 = rectangular_flows(pt, br)
        s1, s2 = phasor_flows(pt, br)
        worst_oracle = max(worst_oracle, abs(complex(p1, q1) - s1), abs(complex(p2, q2) - s2))
        r1, t1, r2, t2 = rotated_flows(pt, br, psi)
        rot = complex(math.cos(psi), -math.sin(psi))
        worst_flow = max(worst_flow, abs(complex(r1, t1) - s1 * rot), abs(complex(r2, t2) - s2 * rot))
        p, q = rng.normal(size=4), rng.normal(size=4)
        pr, qr = rotate(p, q, psi)
        pb, qb = inverse_rotation(pr, qr, psi)
        worst_inj = max(worst_inj, float(np.max(np.abs(pb - p))), float(np.max(np.abs(qb - q))))
    ok = max(worst_flow, worst_oracle, worst_inj) <= 1e-10
    record(8, ok, f"1000 points: rotated vs phasor*e^(-j psi) {worst_flow:.1e}, rectangular vs "
                  f"phasor {worst_oracle:.1e}, injection round trip {worst_inj:.1e}")
    assert ok


# ---------------------------------------------------------------- 9

@pytest.mark.filterwarnings("ignore:Solution may be inaccurate")
def test_criterion_9_external_solver():
    pytest.importorskip("cvxpy")
    tight = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    worst_rel, worst_feas, parts, missing = 0.0, 0.0, [], []
    names = ("case3_lmbd", "case30_ieee", "case5_pjm", "case14_ieee")
    for name in names:
        e = manifest().get(name)
        path = e.file if e else DATA / "pglib" / f"pglib_opf_{name}.m"
        if not path.is_file():
            missing.append(name)
            continue
        case = load_case(path)
        for kind, psi in (("qc", 0.0), ("rqc", 0.0), ("rqc", 80.0)):
            prog, _ = build(case, kind, math.radians(psi))
            rep = solve(prog)
            note_kkt(f"{name}:{kind}{psi:g}", rep)
            status, theirs, x = solve_external(prog, "CLARABEL", **tight)
            assert status.startswith("optimal"), (name, kind, status)
            worst_feas = max(worst_feas, prog.residuals(x)["max"])
            worst_rel = max(worst_rel, abs(theirs - rep.primal_objective) / abs(rep.primal_objective))
        parts.append(name)
    kkt_worst = max(v for _, v in KKT)
    required_missing = [m for m in missing if m in ("case3_lmbd", "case30_ieee")]
    ok = worst_rel <= 1e-5 and kkt_worst <= 1e-8 and not required_missing
    record(9, ok, f"Clarabel vs internal on {', '.join(parts)} (qc, rqc0, rqc80): max rel diff "
                  f"{worst_rel:.1e}, external point residual {worst_feas:.1e}; max KKT over "
                  f"{len(KKT)} Optimal reports {kkt_worst:.1e}"
                  + (f"; case file missing: {', '.join(required_missing)}" if required_missing else ""))
    assert worst_rel <= 1e-5 and kkt_worst <= 1e-8
    assert not required_missing, f"PGLib case files not in data/pglib: {required_missing}"


# ---------------------------------------------------------------- 10

def test_criterion_10_scale(tmp_path):
    real = DATA / "pglib" / "pglib_opf_case9241_pegase.m"
    if real.is_file():
        path, what = real, "case9241_pegase"
    else:
        path = tmp_path / "synthetic9241.m"
        path.write_text(synthetic_case_text(9241, 16049, 1445, seed=10))
        what = "synthetic 9241-bus/16049-branch stand-in"
    out = tmp_path / "out.conic"
    t0 = time.perf_counter()
    code = cli_main(["export", str(path), "--kind", "rqc", "--psi", "80", "--out", str(out)])
    elapsed = time.perf_counter() - t0
    size = out.stat().st_size / 1e6 if out.exists() else 0.0
    crit2 = RESULTS.get(2, (False, ""))[0]
    ok = real.is_file() and code == 0 and elapsed < 60 and crit2
    record(10, ok, f"export of {what} took {elapsed:.1f} s ({size:.0f} MB, exit {code}); "
                   f"criterion 2 {'PASS' if crit2 else 'not passed'}"
                   + ("" if real.is_file() else "; case9241_pegase file missing"))
    assert code == 0 and elapsed < 60
    assert real.is_file(), "case9241_pegase not in data/pglib"
