"""Experiment drivers: psi sweeps, gap tables and envelope comparison reports.

Angles are degrees at this module's public boundary (grids, table cells,
report intervals) and radians everywhere below it.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import envelopes as env
from .builders import BuildOptions, Kind, RelaxationResult, optimality_gap, solve_relaxation
from .caseio import NetworkCase, load_case
from .conic import Tolerances

log = logging.getLogger(__name__)

DEFAULT_GRID = "-90:90:0.5"
SUGGESTED_PSI = 80.0


# ---------------------------------------------------------------- manifest

@dataclass(frozen=True)
class ManifestEntry:
    name: str
    file: Path
    local: float
    source: str
    reference: dict = field(default_factory=dict, compare=False)


class ManifestError(ValueError):
    pass


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read a JSON manifest; relative case paths resolve against its directory."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    items = doc.get("cases", []) if isinstance(doc, dict) else doc
    out = []
    for k, item in enumerate(items):
        try:
            f = Path(item["file"])
            local = float(item["local"])
            source = str(item["source"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: entry {k} needs file, local and source") from exc
        if not f.is_absolute():
            f = path.parent / f
        out.append(ManifestEntry(str(item.get("name", f.stem)), f, local, source,
                                 dict(item.get("reference", {}))))
    return out


def parse_psi_range(text: str) -> np.ndarray:
    """'lo:hi:step' in degrees, inclusive of hi when it lies on the grid."""
    try:
        lo, hi, step = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise ValueError(f"psi range must be lo:hi:step, got {text!r}") from exc
    if not step > 0:
        raise ValueError("psi range step must be positive")
    if hi < lo:
        raise ValueError("psi range upper end below lower end")
    n = int(math.floor((hi - lo) / step + 1e-9))
    # integer multiples keep grid points exact (no accumulated drift)
    return np.array([round(lo + k * step, 10) for k in range(n + 1)])


# ---------------------------------------------------------------- sweeps

@dataclass(frozen=True)
class SweepResult:
    case: str
    kind: Kind
    local: float
    source: str
    psi_deg: np.ndarray
    bound: np.ndarray
    gap: np.ndarray              # fraction, NaN on failed points

    def __post_init__(self):
        if len(self.psi_deg) > 1 and not np.all(np.diff(self.psi_deg) > 0):
            raise ValueError("sweep grid must be strictly increasing")

    @property
    def normalized(self) -> np.ndarray:
        g = self.gap
        if not np.any(np.isfinite(g)):
            return np.full_like(g, np.nan)
        top = np.nanmax(g)
        if top <= 0:
            # every gap is zero (or numerically negative): flat curve at 1
            return np.where(np.isfinite(g), 1.0, np.nan)
        out = g / top
        out[g == top] = 1.0
        return out

    @property
    def psi_star(self) -> float:
        if not np.any(np.isfinite(self.gap)):
            return math.nan
        return float(self.psi_deg[int(np.nanargmin(self.gap))])

    @property
    def min_gap(self) -> float:
        return float(np.nanmin(self.gap)) if np.any(np.isfinite(self.gap)) else math.nan

    def at(self, psi_deg: float) -> float:
        hit = np.flatnonzero(np.isclose(self.psi_deg, psi_deg, atol=1e-9))
        return float(self.gap[hit[0]]) if len(hit) else math.nan

    def symmetry(self) -> dict[str, dict[str, float]]:
        """Empirical symmetry of the gap curve under three candidate maps.

        ``period_180`` pairs psi with psi + 180; ``shift_90`` pairs psi with
        psi + 90 (both wrapped into the grid span modulo 180); ``reflection``
        pairs psi with -psi. Each entry reports how many pairs were found and
        the largest and mean absolute gap difference (percentage points).
        """
        maps = {"period_180": lambda p: p + 180.0, "shift_90": lambda p: p + 90.0,
                "reflection": lambda p: -p}
        out = {}
        for name, fn in maps.items():
            diffs = []
            for p, g in zip(self.psi_deg, self.gap):
                q = fn(p)
                for cand in (q, q - 180.0, q - 360.0, q + 180.0):
                    if math.isclose(cand, p, abs_tol=1e-9):
                        continue
                    v = self.at(cand)
                    if math.isfinite(v) and math.isfinite(g):
                        diffs.append(abs(v - g) * 100)
                        break
            out[name] = {"pairs": len(diffs),
                         "max_abs_diff_pp": max(diffs) if diffs else math.nan,
                         "mean_abs_diff_pp": float(np.mean(diffs)) if diffs else math.nan}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["psi_deg", "bound", "gap", "normalized_gap"])
        for p, b, g, n in zip(self.psi_deg, self.bound, self.gap, self.normalized):
            w.writerow([_fmt(p), _fmt(b), _fmt(g), _fmt(n)])
        buf.write(f"# psi_star={_fmt(self.psi_star)} min_gap={_fmt(self.min_gap)} "
                  f"kind={self.kind} case={self.case} local={_fmt(self.local)} source={self.source}\n")
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"case": self.case, "kind": self.kind, "local": self.local, "source": self.source,
                "psi_deg": self.psi_deg.tolist(), "bound": _jlist(self.bound),
                "gap": _jlist(self.gap), "normalized_gap": _jlist(self.normalized),
                "psi_star": _jnum(self.psi_star), "min_gap": _jnum(self.min_gap),
                "symmetry": self.symmetry()}


def _fmt(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "nan"
    return f"{x:.10g}"


def _jnum(x: float):
    return float(x) if math.isfinite(x) else None


def _jlist(a: Iterable[float]) -> list:
    return [_jnum(float(v)) for v in a]


def _solve_point(args) -> tuple[float, float, str]:
    case, kind, psi_deg, options, tol = args
    try:
        res = solve_relaxation(case, kind, math.radians(psi_deg), options, tol)
    except Exception as exc:  # a failed grid point must not end the sweep
        return math.nan, math.nan, f"{type(exc).__name__}: {exc}"
    return res.objective, res.solve_time, res.status


def _map(fn: Callable, jobs: list, n_jobs: int) -> list:
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(fn, jobs))  # map keeps submission order
    return [fn(j) for j in jobs]


def sweep(case: NetworkCase, kind: Kind, grid_deg: Sequence[float], local: float,
          source: str = "", *, options: BuildOptions | None = None,
          tol: Tolerances | None = None, jobs: int = 1) -> SweepResult:
    grid = np.asarray(grid_deg, dtype=float)
    out = _map(_solve_point, [(case, kind, float(p), options, tol) for p in grid], jobs)
    bounds = np.array([o[0] for o in out])
    for p, (_, _, status) in zip(grid, out):
        if status != "Optimal":
            log.warning("%s %s psi=%g: %s", case.name, kind, p, status)
    gaps = np.array([optimality_gap(local, b) if math.isfinite(b) else math.nan for b in bounds])
    return SweepResult(case.name, kind, local, source, grid, bounds, gaps)


# ---------------------------------------------------------------- gap tables

@dataclass
class GapTableRow:
    case: str
    local: float
    source: str
    qc: float = math.nan             # gaps in percent
    rqc0: float = math.nan
    rqc80: float = math.nan
    rqc_star: float = math.nan
    psi_star_rqc: float = math.nan
    trqc80: float = math.nan
    trqc_star: float = math.nan
    psi_star_trqc: float = math.nan
    times: dict[str, float] = field(default_factory=dict)
    errors: list[str] = field(default_factory=list)

    GAP_COLUMNS = ("qc", "rqc0", "rqc80", "rqc_star", "psi_star_rqc", "trqc80", "trqc_star",
                   "psi_star_trqc")


CSV_HEADER = ("case", "local_objective", "local_source") + GapTableRow.GAP_COLUMNS


def _row_for(entry: ManifestEntry, grid: np.ndarray | None, options: BuildOptions | None,
             tol: Tolerances | None) -> GapTableRow:
    row = GapTableRow(entry.name, entry.local, entry.source)
    try:
        case = load_case(entry.file)
    except (OSError, ValueError) as exc:
        row.errors.append(f"{entry.file}: {exc}")
        return row

    def one(kind: Kind, psi: float, label: str) -> float:
        try:
            res: RelaxationResult = solve_relaxation(case, kind, math.radians(psi), options, tol)
        except Exception as exc:
            row.errors.append(f"{label}: {type(exc).__name__}: {exc}")
            return math.nan
        row.times[label] = res.solve_time
        if res.status != "Optimal":
            row.errors.append(f"{label}: {res.status}")
            return math.nan
        return 100 * optimality_gap(entry.local, res.objective)

    row.qc = one("qc", 0.0, "qc")
    row.rqc0 = one("rqc", 0.0, "rqc0")
    row.rqc80 = one("rqc", SUGGESTED_PSI, "rqc80")
    row.trqc80 = one("trqc", SUGGESTED_PSI, "trqc80")
    if grid is not None and len(grid):
        for kind in ("rqc", "trqc"):
            sw = sweep(case, kind, grid, entry.local, entry.source, options=options, tol=tol)
            setattr(row, f"{kind}_star", 100 * sw.min_gap)
            setattr(row, f"psi_star_{kind}", sw.psi_star)
    for e in row.errors:
        log.warning("%s: %s", entry.name, e)
    return row


def _row_job(args) -> GapTableRow:
    return _row_for(*args)


def gap_table(entries: Sequence[ManifestEntry], grid: np.ndarray | None = None, *,
              options: BuildOptions | None = None, tol: Tolerances | None = None,
              jobs: int = 1) -> list[GapTableRow]:
    """One row per manifest entry, in manifest order. ``grid=None`` skips psi*."""
    return _map(_row_job, [(e, grid, options, tol) for e in entries], jobs)


def table_csv(rows: Sequence[GapTableRow]) -> str:
    """Deterministic CSV: gaps rounded to 1e-6 percentage points, no timings."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        cells = [r.case, _fmt(r.local), r.source]
        for col in GapTableRow.GAP_COLUMNS:
            v = getattr(r, col)
            cells.append("" if not math.isfinite(v) else f"{v:.6f}")
        w.writerow(cells)
    return buf.getvalue()


def _mean(values: Iterable[float]) -> float:
    vals = [v for v in values if math.isfinite(v)]
    return float(np.mean(vals)) if vals else math.nan


def summary_lines(rows: Sequence[GapTableRow]) -> list[str]:
    """Average improvements in percentage points (positive = better than the reference)."""
    pairs = [("RQC(80) vs QC", "qc", "rqc80"), ("TRQC(80) vs QC", "qc", "trqc80"),
             ("RQC(psi*) vs QC", "qc", "rqc_star"), ("TRQC(psi*) vs QC", "qc", "trqc_star"),
             ("TRQC(psi*) vs RQC(psi*)", "rqc_star", "trqc_star")]
    out = []
    for label, ref, new in pairs:
        m = _mean(getattr(r, ref) - getattr(r, new) for r in rows)
        out.append(f"average improvement {label}: {'n/a' if math.isnan(m) else f'{m:.4f} pp'}")
    ratio = _mean(r.times["trqc80"] / r.times["rqc80"] for r in rows
                  if r.times.get("rqc80", 0) > 0 and "trqc80" in r.times)
    out.append(f"mean solve-time ratio TRQC(80)/RQC(80): {'n/a' if math.isnan(ratio) else f'{ratio:.3f}'}")
    return out


def table_markdown(rows: Sequence[GapTableRow]) -> str:
    def cell(v: float, digits: int = 2) -> str:
        return "" if not math.isfinite(v) else f"{v:.{digits}f}"

    def star(g: float, p: float) -> str:
        return "" if not math.isfinite(g) else f"{g:.2f} ({p:g})"

    lines = ["| Case | Local (source) | QC | RQC 0 | RQC 80 | RQC psi* | TRQC 80 | TRQC psi* |",
             "|---|---|---|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.case} | {r.local:.2f} ({r.source}) | {cell(r.qc)} | {cell(r.rqc0)} | "
                     f"{cell(r.rqc80)} | {star(r.rqc_star, r.psi_star_rqc)} | {cell(r.trqc80)} | "
                     f"{star(r.trqc_star, r.psi_star_trqc)} |")
    lines.append("")
    lines += [f"- {s}" for s in summary_lines(rows)]
    errs = [f"- {r.case}: {e}" for r in rows for e in r.errors]
    if errs:
        lines += ["", "Failures:"] + errs
    return "\n".join(lines) + "\n"


def table_json(rows: Sequence[GapTableRow]) -> str:
    doc = {"rows": [{k: (_jnum(v) if isinstance(v, float) else v) for k, v in asdict(r).items()}
                    for r in rows],
           "summary": summary_lines(rows)}
    return json.dumps(doc, indent=2, sort_keys=True)


# ---------------------------------------------------------------- envelope report

@dataclass(frozen=True)
class EnvelopeReport:
    lo_deg: float
    hi_deg: float
    g: float
    b: float
    psi_deg: float
    theta_deg: np.ndarray
    function: np.ndarray
    rect_lower: np.ndarray
    rect_upper: np.ndarray
    polar_lower: np.ndarray
    polar_upper: np.ndarray
    rect_envelopes: tuple[env.TrigEnvelope, env.TrigEnvelope]
    polar_envelope: env.TrigEnvelope
    verdict: env.DominanceVerdict

    @property
    def magnitude(self) -> float:
        return math.hypot(self.g, self.b)

    @property
    def delta_deg(self) -> float:
        return math.degrees(math.atan2(self.b, self.g))

    def comparison(self) -> dict[str, float]:
        """Sampled boundary differences; positive means the polar boundary is tighter."""
        low = self.polar_lower - self.rect_lower
        up = self.rect_upper - self.polar_upper
        return {"lower_min": float(low.min()), "lower_max": float(low.max()),
                "upper_min": float(up.min()), "upper_max": float(up.max()),
                "max_abs_difference": float(max(np.abs(low).max(), np.abs(up).max()))}

    def to_dict(self) -> dict:
        return {
            "interval_deg": [self.lo_deg, self.hi_deg], "g": self.g, "b": self.b,
            "magnitude": self.magnitude, "delta_deg": self.delta_deg, "psi_deg": self.psi_deg,
            "rectangular": {"cos": self.rect_envelopes[0].to_dict(), "sin": self.rect_envelopes[1].to_dict()},
            "polar": self.polar_envelope.to_dict(),
            "samples": {"theta_deg": self.theta_deg.tolist(), "function": self.function.tolist(),
                        "rect_lower": self.rect_lower.tolist(), "rect_upper": self.rect_upper.tolist(),
                        "polar_lower": self.polar_lower.tolist(), "polar_upper": self.polar_upper.tolist()},
            "comparison": self.comparison(),
            "dominance": asdict(self.verdict),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_deg", "function", "rect_lower", "rect_upper", "polar_lower", "polar_upper"])
        for row in zip(self.theta_deg, self.function, self.rect_lower, self.rect_upper,
                       self.polar_lower, self.polar_upper):
            w.writerow([_fmt(v) for v in row])
        buf.write(f"# dominance={self.verdict.verdict} critical_points={self.verdict.critical_points}\n")
        return buf.getvalue()


def _limits(e: env.TrigEnvelope, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = e.bounds_at(x)
    smin, smax, cmin, cmax = env.trig_bounds(e.lo, e.hi)
    fmin, fmax = (smin, smax) if e.func == "sin" else (cmin, cmax)
    return np.maximum(lo, fmin), np.minimum(hi, fmax)


def envelope_report(lo_deg: float, hi_deg: float, g: float, b: float, psi_deg: float = 0.0,
                    samples: int = 181, fallback: bool = False) -> EnvelopeReport:
    """Compare g<cos> + b<sin> against Y<cos(theta - delta - psi)> on one interval.

    Both families bound the same function once the admittance is rotated by
    psi (g + jb -> Y e^{j(delta + psi)}). Each family's per-angle interval is
    the envelope rows intersected with the trigonometric box.
    """
    if not lo_deg < hi_deg:
        raise ValueError("interval must have lo < hi")
    if samples < 2:
        raise ValueError("need at least two samples")
    y = math.hypot(g, b)
    if y == 0:
        raise ValueError("admittance must be nonzero")
    lo, hi = math.radians(lo_deg), math.radians(hi_deg)
    shift = math.atan2(b, g) + math.radians(psi_deg)
    gr, br = y * math.cos(shift), y * math.sin(shift)
    theta = np.linspace(lo, hi, samples)

    ce = env.cosine_envelope(lo, hi, fallback=fallback)
    se = env.sine_envelope(lo, hi, fallback=fallback)
    c_lo, c_hi = _limits(ce, theta)
    s_lo, s_hi = _limits(se, theta)
    rect_lower = np.where(gr >= 0, gr * c_lo, gr * c_hi) + np.where(br >= 0, br * s_lo, br * s_hi)
    rect_upper = np.where(gr >= 0, gr * c_hi, gr * c_lo) + np.where(br >= 0, br * s_hi, br * s_lo)

    pe = env.cosine_envelope(lo - shift, hi - shift, fallback=fallback)
    p_lo, p_hi = _limits(pe, theta - shift)
    verdict = env.dominance_test(lo, hi, shift)
    return EnvelopeReport(lo_deg, hi_deg, g, b, psi_deg, np.degrees(theta), y * np.cos(theta - shift),
                          rect_lower, rect_upper, y * p_lo, y * p_hi, (ce, se), pe, verdict)
