import json
import math

import numpy as np
import pytest

from rqcopf.builders import optimality_gap, solve_relaxation
from rqcopf.experiments import (CSV_HEADER, ManifestEntry, ManifestError, SweepResult,
                                envelope_report, gap_table, load_manifest, parse_psi_range,
                                summary_lines, sweep, table_csv, table_json, table_markdown)

from conftest import DATA, case_path


def test_parse_psi_range():
    g = parse_psi_range("-90:90:0.5")
    assert len(g) == 361 and g[0] == -90 and g[-1] == 90
    assert 0.0 in g and 80.0 in g
    assert parse_psi_range("0:0:1").tolist() == [0.0]
    assert parse_psi_range("0:1:0.3").tolist() == [0.0, 0.3, 0.6, 0.9]
    for bad in ("1:0:1", "0:1:0", "0:1", "a:b:c"):
        with pytest.raises(ValueError):
            parse_psi_range(bad)


def test_manifest_paths_resolve():
    entries = load_manifest(DATA / "manifest_local.json")
    assert [e.name for e in entries] == ["case3_lmbd", "case5_pjm", "case14_ieee"]
    assert all(e.file.is_file() for e in entries)
    full = load_manifest(DATA / "manifest.json")
    assert full[0].reference["psi_star_rqc"] == -81


def test_manifest_errors(tmp_path):
    p = tmp_path / "m.json"
    p.write_text('{"cases": [{"file": "x.m"}]}')
    with pytest.raises(ManifestError):
        load_manifest(p)
    p.write_text("{not json")
    with pytest.raises(ManifestError):
        load_manifest(p)


def _result(gaps, psi=None):
    gaps = np.asarray(gaps, dtype=float)
    psi = np.arange(len(gaps), dtype=float) if psi is None else np.asarray(psi, dtype=float)
    return SweepResult("c", "rqc", 1.0, "t", psi, 1 - gaps, gaps)


def test_normalized_and_star():
    r = _result([0.02, 0.01, np.nan, 0.04])
    n = r.normalized
    assert n[3] == 1.0 and n[1] == pytest.approx(0.25) and math.isnan(n[2])
    assert r.psi_star == 1.0 and r.min_gap == pytest.approx(0.01)
    assert math.isnan(r.at(7.0))
    assert np.all(_result([0.0, 0.0]).normalized == 1.0)
    assert math.isnan(_result([np.nan]).psi_star)
    with pytest.raises(ValueError):
        _result([0.1, 0.2], psi=[1.0, 0.0])


def test_symmetry_diagnostics():
    psi = np.arange(-90.0, 91.0, 10.0)
    r = _result(0.01 + 0.001 * np.cos(np.radians(4 * psi)), psi)
    s = r.symmetry()
    assert s["shift_90"]["max_abs_diff_pp"] < 1e-12
    assert s["reflection"]["max_abs_diff_pp"] < 1e-12
    assert s["shift_90"]["pairs"] > 0


def test_single_point_sweep_matches_direct_solve(case3):
    local = 5812.643
    r = sweep(case3, "rqc", parse_psi_range("0:0:1"), local, "test")
    assert r.normalized.tolist() == [1.0]
    direct = solve_relaxation(case3, "rqc", 0.0)
    assert r.gap[0] == pytest.approx(optimality_gap(local, direct.objective), abs=1e-12)
    text = r.to_csv()
    assert text.splitlines()[0] == "psi_deg,bound,gap,normalized_gap"
    assert text.splitlines()[-1].startswith("# psi_star=0 ")
    assert json.loads(json.dumps(r.to_dict()))["kind"] == "rqc"


def test_sweep_parallel_matches_serial(case3):
    grid = parse_psi_range("-20:20:20")
    a = sweep(case3, "trqc", grid, 5812.643)
    b = sweep(case3, "trqc", grid, 5812.643, jobs=2)
    np.testing.assert_array_equal(a.bound, b.bound)


def test_gap_table_deterministic_and_errors(tmp_path):
    entries = [ManifestEntry("case3_lmbd", case_path("case3_lmbd"), 5812.64, "published"),
               ManifestEntry("missing", tmp_path / "nope.m", 1.0, "x")]
    rows = gap_table(entries, None)
    assert rows[1].errors and math.isnan(rows[1].qc)
    # Table I reference for case3 (percent)
    assert rows[0].qc == pytest.approx(0.97, abs=0.3)
    assert rows[0].rqc80 == pytest.approx(0.89, abs=0.3)
    a = table_csv(rows)
    b = table_csv(gap_table(entries, None))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[2].startswith("missing,") and lines[2].endswith(",,,,,,,")
    assert "missing" in table_markdown(rows)
    assert json.loads(table_json(rows))
    lines = summary_lines(rows)
    first = next(s for s in lines if s.startswith("average improvement RQC(80) vs QC"))
    assert first.endswith(f"{rows[0].qc - rows[0].rqc80:.4f} pp")


def test_empty_table():
    assert table_csv([]) == ",".join(CSV_HEADER) + "\n"


def test_envelope_report_zero_delta_families_coincide():
    rep = envelope_report(-30, 30, 1.0, 0.0)
    assert rep.comparison()["max_abs_difference"] <= 1e-10


def test_envelope_report_lower_boundary():
    # 0.6 - j0.8 on [-60, 0]: polar lower boundary dominates
    rep = envelope_report(-60, 0, 0.6, -0.8)
    assert rep.verdict.verdict == "LowerBoundaryTighter"
    cmp = rep.comparison()
    assert cmp["lower_min"] >= -1e-12
    # both families are valid: the function lies inside every sampled interval
    for lo, hi in ((rep.rect_lower, rep.rect_upper), (rep.polar_lower, rep.polar_upper)):
        assert np.all(lo <= rep.function + 1e-12) and np.all(rep.function <= hi + 1e-12)
    assert "dominance=" in rep.to_csv()


def test_envelope_report_validation():
    with pytest.raises(ValueError):
        envelope_report(10, 0, 1, 0)
    with pytest.raises(ValueError):
        envelope_report(0, 10, 0, 0)
