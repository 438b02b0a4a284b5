"""MATPOWER case files: parsing, validation and writing.

Quantities are converted to per-unit on the system base when a case is
parsed and converted back when it is written, so that
``parse_case(write_case(case)) == case`` up to floating point rounding.

Column layouts follow the MATPOWER manual (version 2 case format)::

    bus:     bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin
    gen:     bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin ...
    branch:  fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax
    gencost: model startup shutdown n c(n-1) ... c0
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

# Branches whose angle-difference bounds are missing (0/0 or beyond 360 deg)
# get this symmetric bound, just inside the range where the base sine and
# cosine envelopes apply.
UNBOUNDED_ANGLE = math.pi / 2 - 1e-4

REF_BUS = 3
ISOLATED_BUS = 4


class CaseSyntaxError(ValueError):
    """Malformed case text. ``line`` is 1-based, or None if not applicable."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class CaseDataError(ValueError):
    """Well-formed text describing an unusable network."""


@dataclass(frozen=True)
class RawCase:
    """Tables exactly as they appear in the file (MW, MVAr, degrees)."""

    name: str
    base_mva: float
    bus_table: tuple[tuple[float, ...], ...]
    gen_table: tuple[tuple[float, ...], ...]
    branch_table: tuple[tuple[float, ...], ...]
    gencost_table: tuple[tuple[float, ...], ...]


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float
    v_max: float
    p_demand: float = 0.0
    q_demand: float = 0.0
    g_shunt: float = 0.0
    b_shunt: float = 0.0
    bus_type: int = 1
    base_kv: float = 0.0
    vm: float = 1.0
    va: float = 0.0
    area: int = 1
    zone: int = 1


@dataclass(frozen=True)
class Generator:
    """Per-unit generator. Cost is c2*P^2 + c1*P + c0 with P in per-unit."""

    bus: int
    p_min: float
    p_max: float
    q_min: float
    q_max: float
    c2: float = 0.0
    c1: float = 0.0
    c0: float = 0.0
    pg: float = 0.0
    qg: float = 0.0
    vg: float = 1.0

    def cost(self, p: float) -> float:
        return self.c2 * p * p + self.c1 * p + self.c0


@dataclass(frozen=True)
class Branch:
    """Pi-model branch with an off-nominal tap on the from side."""

    from_bus: int
    to_bus: int
    r: float
    x: float
    b_c: float = 0.0
    tau: float = 1.0
    shift: float = 0.0
    s_rating: float | None = None
    angmin: float = -UNBOUNDED_ANGLE
    angmax: float = UNBOUNDED_ANGLE

    @property
    def g(self) -> float:
        z2 = self.r * self.r + self.x * self.x
        return self.r / z2 if z2 > 0 else math.inf

    @property
    def b(self) -> float:
        z2 = self.r * self.r + self.x * self.x
        return -self.x / z2 if z2 > 0 else -math.inf

    @property
    def Y(self) -> float:
        return math.hypot(self.g, self.b)

    @property
    def delta(self) -> float:
        return math.atan2(self.b, self.g)


@dataclass(frozen=True)
class NetworkCase:
    name: str
    buses: tuple[Bus, ...]
    generators: tuple[Generator, ...]
    branches: tuple[Branch, ...]
    s_base: float = 100.0
    notes: tuple[str, ...] = field(default=(), compare=False)

    @property
    def reference_buses(self) -> frozenset[int]:
        return frozenset(b.id for b in self.buses if b.bus_type == REF_BUS)

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    def with_demand(self, p: Sequence[float], q: Sequence[float]) -> "NetworkCase":
        """Copy of the case with per-bus demands replaced (per-unit)."""
        buses = tuple(replace(b, p_demand=float(pd), q_demand=float(qd))
                      for b, pd, qd in zip(self.buses, p, q))
        return replace(self, buses=buses)


# ---------------------------------------------------------------- parsing

_NUMBER = re.compile(r"^[+-]?((\d+\.?\d*)|(\.\d+))([eE][+-]?\d+)?$")
_ASSIGN = re.compile(r"^\s*mpc\.(\w+)\s*=\s*(.*)$")
_FUNC = re.compile(r"^\s*function\s+(\w+)\s*=\s*(\w+)")


def _strip_comment(line: str) -> str:
    # '%' inside a quoted string is not a comment
    out = []
    quoted = False
    for ch in line:
        if ch == "'":
            quoted = not quoted
        elif ch == "%" and not quoted:
            break
        out.append(ch)
    return "".join(out)


def _to_float(tok: str, lineno: int) -> float:
    low = tok.lower()
    if low in ("inf", "+inf"):
        return math.inf
    if low == "-inf":
        return -math.inf
    if low == "nan":
        return math.nan
    if not _NUMBER.match(tok):
        raise CaseSyntaxError(f"expected a number, found {tok!r}", lineno)
    return float(tok)


def parse_raw(text: str) -> RawCase:
    """Read the numeric tables of a MATPOWER function file."""
    if not text.strip():
        raise CaseSyntaxError("empty case text", 1)
    lines = text.splitlines()
    name = ""
    scalars: dict[str, float] = {}
    tables: dict[str, list[tuple[float, ...]]] = {}
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = _strip_comment(lines[i]).strip()
        i += 1
        if not line:
            continue
        fm = _FUNC.match(line)
        if fm:
            name = fm.group(2)
            continue
        am = _ASSIGN.match(line)
        if not am:
            continue
        key, rhs = am.group(1), am.group(2).strip()
        if rhs.startswith("["):
            body = [rhs[1:]]
            start = lineno
            while "]" not in body[-1]:
                if i >= len(lines):
                    raise CaseSyntaxError(f"unterminated matrix mpc.{key}", start)
                body.append(_strip_comment(lines[i]))
                i += 1
            last = body[-1]
            body[-1] = last[:last.index("]")]
            rows: list[tuple[float, ...]] = []
            for off, chunk in enumerate(body):
                for piece in chunk.split(";"):
                    toks = piece.replace(",", " ").split()
                    if toks:
                        rows.append(tuple(_to_float(t, start + off) for t in toks))
            widths = {len(r) for r in rows}
            if len(widths) > 1:
                raise CaseSyntaxError(f"rows of mpc.{key} have unequal lengths", start)
            tables[key] = rows
        elif rhs.startswith("{"):
            # cell arrays (bus names etc.) are skipped
            start = lineno
            while "}" not in rhs:
                if i >= len(lines):
                    raise CaseSyntaxError(f"unterminated cell array mpc.{key}", start)
                rhs = _strip_comment(lines[i])
                i += 1
        elif rhs.startswith("'"):
            continue
        else:
            val = rhs.rstrip(";").strip()
            scalars[key] = _to_float(val, lineno)

    if "baseMVA" not in scalars:
        raise CaseSyntaxError("missing mpc.baseMVA")
    for key in ("bus", "gen", "branch"):
        if key not in tables:
            raise CaseSyntaxError(f"missing mpc.{key}")
    return RawCase(
        name=name,
        base_mva=scalars["baseMVA"],
        bus_table=tuple(tables["bus"]),
        gen_table=tuple(tables["gen"]),
        branch_table=tuple(tables["branch"]),
        gencost_table=tuple(tables.get("gencost", [])),
    )


def _polynomial_cost(row: Sequence[float], k: int) -> tuple[float, float, float]:
    if len(row) < 4:
        raise CaseDataError(f"gencost row {k + 1} is too short")
    model = int(row[0])
    if model == 1:
        raise CaseDataError(f"gencost row {k + 1}: piecewise-linear costs are not supported")
    if model != 2:
        raise CaseDataError(f"gencost row {k + 1}: unknown cost model {model}")
    n = int(row[3])
    coeffs = list(row[4:4 + n])
    if len(coeffs) != n:
        raise CaseDataError(f"gencost row {k + 1}: expected {n} coefficients")
    high = coeffs[:-3] if n > 3 else []
    if any(c != 0 for c in high):
        raise CaseDataError(f"gencost row {k + 1}: polynomial degree above 2")
    coeffs = ([0.0, 0.0, 0.0] + coeffs)[-3:]
    return coeffs[0], coeffs[1], coeffs[2]


def _angle_bound(deg: float, lower: bool) -> float:
    if abs(deg) >= 360 or not math.isfinite(deg):
        return -UNBOUNDED_ANGLE if lower else UNBOUNDED_ANGLE
    return math.radians(deg)


def raw_to_network(raw: RawCase) -> NetworkCase:
    """Per-unit conversion, dropping out-of-service elements."""
    base = raw.base_mva
    if not base > 0:
        raise CaseDataError(f"base MVA must be positive, got {base}")
    notes: list[str] = []

    buses = []
    for row in raw.bus_table:
        if len(row) < 13:
            raise CaseDataError(f"bus {row[0]:g}: expected 13 columns, found {len(row)}")
        btype = int(row[1])
        if btype == ISOLATED_BUS:
            continue
        buses.append(Bus(
            id=int(row[0]), bus_type=btype,
            p_demand=row[2] / base, q_demand=row[3] / base,
            g_shunt=row[4] / base, b_shunt=row[5] / base,
            area=int(row[6]), vm=row[7], va=row[8], base_kv=row[9],
            zone=int(row[10]), v_max=row[11], v_min=row[12],
        ))
    known = {b.id for b in buses}
    all_ids = {int(r[0]) for r in raw.bus_table}

    if raw.gencost_table and len(raw.gencost_table) < len(raw.gen_table):
        raise CaseDataError("fewer gencost rows than generators")
    gens = []
    per_bus: dict[int, int] = {}
    for k, row in enumerate(raw.gen_table):
        if len(row) < 10:
            raise CaseDataError(f"generator row {k + 1}: expected at least 10 columns")
        bus = int(row[0])
        if bus not in all_ids:
            raise CaseDataError(f"generator row {k + 1} references unknown bus {bus}")
        if row[7] <= 0 or bus not in known:
            continue
        c2 = c1 = c0 = 0.0
        if raw.gencost_table:
            c2, c1, c0 = _polynomial_cost(raw.gencost_table[k], k)
        gens.append(Generator(
            bus=bus, pg=row[1] / base, qg=row[2] / base,
            q_max=row[3] / base, q_min=row[4] / base, vg=row[5],
            p_max=row[8] / base, p_min=row[9] / base,
            c2=c2 * base * base, c1=c1 * base, c0=c0,
        ))
        per_bus[bus] = per_bus.get(bus, 0) + 1
    for bus, count in sorted(per_bus.items()):
        if count > 1:
            notes.append(f"bus {bus} hosts {count} generators, kept distinct")

    branches = []
    for k, row in enumerate(raw.branch_table):
        if len(row) < 11:
            raise CaseDataError(f"branch row {k + 1}: expected at least 11 columns")
        f, t = int(row[0]), int(row[1])
        for bus in (f, t):
            if bus not in all_ids:
                raise CaseDataError(f"branch row {k + 1} references unknown bus {bus}")
        if row[10] <= 0 or f not in known or t not in known:
            continue
        angmin_deg = row[11] if len(row) > 11 else -360.0
        angmax_deg = row[12] if len(row) > 12 else 360.0
        if angmin_deg == 0 and angmax_deg == 0:
            angmin_deg, angmax_deg = -360.0, 360.0
        angmin = _angle_bound(angmin_deg, lower=True)
        angmax = _angle_bound(angmax_deg, lower=False)
        if (angmin, angmax) != (math.radians(angmin_deg), math.radians(angmax_deg)):
            notes.append(f"branch {k + 1} ({f}-{t}): angle bounds clamped to "
                         f"[{math.degrees(angmin):.4f}, {math.degrees(angmax):.4f}] deg")
        rate = row[5]
        if rate <= 0:
            notes.append(f"branch {k + 1} ({f}-{t}): no thermal rating")
        branches.append(Branch(
            from_bus=f, to_bus=t, r=row[2], x=row[3], b_c=row[4],
            tau=row[8] if row[8] != 0 else 1.0,
            shift=math.radians(row[9]),
            s_rating=rate / base if rate > 0 else None,
            angmin=angmin, angmax=angmax,
        ))
    return NetworkCase(name=raw.name, buses=tuple(buses), generators=tuple(gens),
                       branches=tuple(branches), s_base=base, notes=tuple(notes))


def parse_case(text: str) -> NetworkCase:
    return raw_to_network(parse_raw(text))


def load_case(path: str | Path) -> NetworkCase:
    path = Path(path)
    case = parse_case(path.read_text(encoding="utf-8", errors="replace"))
    if not case.name:
        case = replace(case, name=path.stem)
    return case


# ---------------------------------------------------------------- writing

def _num(v: float) -> str:
    if math.isinf(v):
        return "Inf" if v > 0 else "-Inf"
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _table(name: str, header: str, rows: list[list[float]]) -> list[str]:
    out = [f"%% {header}", f"mpc.{name} = ["]
    out += ["\t" + "\t".join(_num(v) for v in row) + ";" for row in rows]
    out += ["];", ""]
    return out


def write_case(case: NetworkCase) -> str:
    """MATPOWER text for ``case``; parse_case reads it back unchanged."""
    base = case.s_base
    name = case.name or "case"
    if not re.match(r"^[A-Za-z]\w*$", name):
        name = "case_" + re.sub(r"\W", "_", name)
    lines = [f"function mpc = {name}", "mpc.version = '2';",
             f"mpc.baseMVA = {_num(base)};", ""]
    bus_rows = [[b.id, b.bus_type, b.p_demand * base, b.q_demand * base,
                 b.g_shunt * base, b.b_shunt * base, b.area, b.vm, b.va,
                 b.base_kv, b.zone, b.v_max, b.v_min] for b in case.buses]
    gen_rows = [[g.bus, g.pg * base, g.qg * base, g.q_max * base, g.q_min * base,
                 g.vg, base, 1, g.p_max * base, g.p_min * base]
                for g in case.generators]
    cost_rows = [[2, 0, 0, 3, g.c2 / (base * base), g.c1 / base, g.c0]
                 for g in case.generators]
    br_rows = []
    for br in case.branches:
        rate = br.s_rating * base if br.s_rating is not None else 0.0
        ratio = 0.0 if br.tau == 1.0 else br.tau
        br_rows.append([br.from_bus, br.to_bus, br.r, br.x, br.b_c, rate, rate, rate,
                        ratio, math.degrees(br.shift), 1,
                        math.degrees(br.angmin), math.degrees(br.angmax)])
    lines += _table("bus", "bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin", bus_rows)
    lines += _table("gen", "bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin", gen_rows)
    lines += _table("gencost", "2 startup shutdown n c2 c1 c0", cost_rows)
    lines += _table("branch", "fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax",
                    br_rows)
    return "\n".join(lines)


# ---------------------------------------------------------------- validation

def validate_case(case: NetworkCase) -> list[str]:
    """Violated invariants, one human-readable line each. Empty means valid."""
    problems: list[str] = []
    if not case.s_base > 0:
        problems.append(f"base MVA {case.s_base} is not positive")
    ids = [b.id for b in case.buses]
    seen: set[int] = set()
    for i in ids:
        if i in seen:
            problems.append(f"bus {i}: duplicate id")
        seen.add(i)
    if not case.reference_buses:
        problems.append("no reference bus")
    for b in case.buses:
        if not 0 < b.v_min <= b.v_max:
            problems.append(f"bus {b.id}: voltage bounds [{b.v_min}, {b.v_max}] invalid")
        vals = (b.p_demand, b.q_demand, b.g_shunt, b.b_shunt)
        if not all(math.isfinite(v) for v in vals):
            problems.append(f"bus {b.id}: non-finite demand or shunt")
    for k, g in enumerate(case.generators):
        if g.bus not in seen:
            problems.append(f"generator {k}: unknown bus {g.bus}")
        if g.p_min > g.p_max:
            problems.append(f"generator {k} at bus {g.bus}: p_min > p_max")
        if g.q_min > g.q_max:
            problems.append(f"generator {k} at bus {g.bus}: q_min > q_max")
        if g.c2 < 0:
            problems.append(f"generator {k} at bus {g.bus}: negative quadratic cost")
    for k, br in enumerate(case.branches):
        tag = f"branch {k} ({br.from_bus}-{br.to_bus})"
        for bus in (br.from_bus, br.to_bus):
            if bus not in seen:
                problems.append(f"{tag}: unknown bus {bus}")
        if br.from_bus == br.to_bus:
            problems.append(f"{tag}: both ends on one bus")
        if br.r == 0 and br.x == 0:
            problems.append(f"{tag}: zero series impedance")
        if not br.tau > 0:
            problems.append(f"{tag}: tap ratio must be positive")
        if br.angmin > br.angmax:
            problems.append(f"{tag}: angmin > angmax")
        if br.s_rating is not None and not br.s_rating > 0:
            problems.append(f"{tag}: nonpositive rating")
    return problems


def require_valid(case: NetworkCase) -> NetworkCase:
    problems = validate_case(case)
    if problems:
        raise CaseDataError("; ".join(problems))
    return case
