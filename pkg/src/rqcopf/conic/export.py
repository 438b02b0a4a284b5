"""Program export: the CONIC/1 text format, JSON dumps, and a cvxpy adapter.

CONIC/1 grammar (one record per line, ``#`` starts a comment line)::

    CONIC/1
    VARS <n>
    ROWS <m>
    CONES <k>
    OBJ <nnz> <c0>
    <j>:<c_j> ...                  one line, nonzero objective coefficients
    EQ <i> <b_i> <nnz>
    <j>:<a_ij> ...                 one line per equality row
    SOC <d> <j1> ... <jd>          ||x[j2..jd]|| <= x[j1]
    RSOC <d> <j1> ... <jd>         ||x[j3..jd]||^2 <= 2 x[j1] x[j2]
    BOUNDS <count>
    <j> <lb> <ub>                  only variables with a finite bound
    END

Indices are zero based. Floats are written with ``repr`` so a write/read
round trip is exact; infinite bounds are ``-inf``/``inf``.
"""

from __future__ import annotations

import io
import json
from typing import IO, Iterable

import numpy as np
import scipy.sparse as sp

from .program import Cone, ConicProgram

MAGIC = "CONIC/1"


class FormatError(ValueError):
    pass


def _f(x: float) -> str:
    return repr(float(x))


def _pairs(idx: Iterable[int], vals: Iterable[float]) -> str:
    return " ".join(f"{int(j)}:{_f(v)}" for j, v in zip(idx, vals))


def write_conic(prog: ConicProgram, out: IO[str] | None = None) -> str:
    """Serialize ``prog`` to CONIC/1 text; returns the text and writes it to ``out`` if given."""
    buf = io.StringIO()
    w = buf.write
    w(f"{MAGIC}\nVARS {prog.n}\nROWS {prog.m}\nCONES {len(prog.cones)}\n")
    nz = np.flatnonzero(prog.c)
    w(f"OBJ {len(nz)} {_f(prog.c0)}\n{_pairs(nz, prog.c[nz])}\n")
    A = prog.A.tocsr()
    A.sort_indices()
    # plain Python lists: repr on built-in floats is much faster than on numpy scalars
    ptr, ind, dat, rhs = A.indptr.tolist(), A.indices.tolist(), A.data.tolist(), prog.b.tolist()
    for i in range(prog.m):
        lo, hi = ptr[i], ptr[i + 1]
        pairs = " ".join([f"{j}:{v!r}" for j, v in zip(ind[lo:hi], dat[lo:hi])])
        w(f"EQ {i} {rhs[i]!r} {hi - lo}\n{pairs}\n")
    for cone in prog.cones:
        tag = "SOC" if cone.kind == "soc" else "RSOC"
        w(f"{tag} {len(cone.indices)} {' '.join(map(str, cone.indices))}\n")
    bnd = np.flatnonzero(np.isfinite(prog.lb) | np.isfinite(prog.ub))
    w(f"BOUNDS {len(bnd)}\n")
    for j in bnd:
        w(f"{j} {_f(prog.lb[j])} {_f(prog.ub[j])}\n")
    w("END\n")
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


def read_conic(src: str | IO[str]) -> ConicProgram:
    text = src if isinstance(src, str) else src.read()
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if not ln.startswith("#")]
    pos = 0

    def nxt() -> str:
        nonlocal pos
        if pos >= len(lines):
            raise FormatError("unexpected end of input")
        pos += 1
        return lines[pos - 1]

    def header(key: str) -> list[str]:
        parts = nxt().split()
        if not parts or parts[0] != key:
            raise FormatError(f"expected {key}, got {parts[:1]}")
        return parts[1:]

    def pairs(line: str, count: int) -> tuple[list[int], list[float]]:
        toks = line.split()
        if len(toks) != count:
            raise FormatError(f"expected {count} index:value pairs, got {len(toks)}")
        idx, val = [], []
        for t in toks:
            j, v = t.split(":", 1)
            idx.append(int(j))
            val.append(float(v))
        return idx, val

    if nxt() != MAGIC:
        raise FormatError(f"missing {MAGIC} header")
    n = int(header("VARS")[0])
    m = int(header("ROWS")[0])
    k = int(header("CONES")[0])
    cnt, c0 = header("OBJ")
    c = np.zeros(n)
    idx, val = pairs(nxt(), int(cnt))
    c[idx] = val
    b = np.zeros(m)
    rows, cols, data = [], [], []
    for i in range(m):
        ri, bi, cnt = header("EQ")
        if int(ri) != i:
            raise FormatError(f"row {ri} out of order (expected {i})")
        b[i] = float(bi)
        idx, val = pairs(nxt(), int(cnt))
        rows += [i] * len(idx)
        cols += idx
        data += val
    cones = []
    for _ in range(k):
        parts = nxt().split()
        if parts[0] not in ("SOC", "RSOC"):
            raise FormatError(f"expected a cone record, got {parts[0]}")
        d = int(parts[1])
        ind = tuple(int(t) for t in parts[2:])
        if len(ind) != d:
            raise FormatError("cone dimension does not match its index list")
        cones.append(Cone("soc" if parts[0] == "SOC" else "rsoc", ind))
    lb, ub = np.full(n, -np.inf), np.full(n, np.inf)
    for _ in range(int(header("BOUNDS")[0])):
        j, lo, hi = nxt().split()
        lb[int(j)], ub[int(j)] = float(lo), float(hi)
    if nxt() != "END":
        raise FormatError("missing END")
    A = sp.csr_matrix((data, (rows, cols)), shape=(m, n))
    A.sort_indices()
    return ConicProgram(c, float(c0), A, b, lb, ub, tuple(cones))


# ---------------------------------------------------------------- JSON

def _num(x: float):
    x = float(x)
    if np.isfinite(x):
        return x
    return "inf" if x > 0 else "-inf"


def program_to_json(prog: ConicProgram) -> str:
    A = prog.A.tocoo()
    order = np.lexsort((A.col, A.row))
    doc = {
        "format": "conic-json/1",
        "n": prog.n, "m": prog.m,
        "c": [float(v) for v in prog.c], "c0": float(prog.c0),
        "A": {"row": A.row[order].tolist(), "col": A.col[order].tolist(),
              "val": [float(v) for v in A.data[order]]},
        "b": [float(v) for v in prog.b],
        "lb": [_num(v) for v in prog.lb], "ub": [_num(v) for v in prog.ub],
        "cones": [{"kind": cn.kind, "indices": list(cn.indices)} for cn in prog.cones],
        "var_names": list(prog.var_names), "row_labels": list(prog.row_labels),
        "meta": {k: v for k, v in prog.meta.items() if isinstance(v, (str, int, float, bool))},
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def program_from_json(text: str) -> ConicProgram:
    doc = json.loads(text)
    n, m = doc["n"], doc["m"]
    A = sp.csr_matrix((doc["A"]["val"], (doc["A"]["row"], doc["A"]["col"])), shape=(m, n))
    A.sort_indices()
    return ConicProgram(np.array(doc["c"], float), float(doc["c0"]), A, np.array(doc["b"], float),
                        np.array([float(v) for v in doc["lb"]]), np.array([float(v) for v in doc["ub"]]),
                        tuple(Cone(cn["kind"], tuple(cn["indices"])) for cn in doc["cones"]),
                        tuple(doc.get("var_names", ())), tuple(doc.get("row_labels", ())),
                        doc.get("meta", {}))


def export_program(prog: ConicProgram, fmt: str = "conic") -> str:
    if fmt in ("conic", "conic-text", "txt"):
        return write_conic(prog)
    if fmt == "json":
        return program_to_json(prog)
    raise ValueError(f"unknown export format {fmt!r}")


# ---------------------------------------------------------------- cvxpy

def solve_external(prog: ConicProgram, solver: str | None = None, **kwargs) -> tuple[str, float, np.ndarray | None]:
    """Solve ``prog`` with cvxpy (optional dependency). Returns (status, objective, x)."""
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("cvxpy is not installed; install the 'external' extra") from exc
    x = cp.Variable(prog.n)
    cons = []
    if prog.m:
        cons.append(prog.A @ x == prog.b)
    lo = np.flatnonzero(np.isfinite(prog.lb))
    hi = np.flatnonzero(np.isfinite(prog.ub))
    if len(lo):
        cons.append(x[lo] >= prog.lb[lo])
    if len(hi):
        cons.append(x[hi] <= prog.ub[hi])
    for cone in prog.cones:
        ind = list(cone.indices)
        if cone.kind == "soc":
            cons.append(cp.SOC(x[ind[0]], x[ind[1:]]))
        else:
            u, v, tail = x[ind[0]], x[ind[1]], x[ind[2:]]
            cons.append(cp.SOC((u + v) / np.sqrt(2), cp.hstack([(u - v) / np.sqrt(2), tail])))
    problem = cp.Problem(cp.Minimize(prog.c @ x + prog.c0), cons)
    problem.solve(solver=solver, **kwargs)
    val = None if x.value is None else np.asarray(x.value, float)
    return str(problem.status), float(problem.value) if problem.value is not None else float("nan"), val
