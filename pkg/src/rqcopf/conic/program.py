"""Conic program representation.

    minimize    c @ x + c0
    subject to  A @ x == b
                lb <= x <= ub
                x[idx] in K  for every cone block

A ``soc`` block (t, x1, ..., xk) means ||(x1..xk)|| <= t. An ``rsoc`` block
(u, v, x1, ..., xk) means ||(x1..xk)||^2 <= 2 u v with u, v >= 0.
Inequalities are written with explicit slack variables, so the only rows are
equalities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Mapping

import numpy as np
import scipy.sparse as sp

ConeKind = Literal["soc", "rsoc"]


@dataclass(frozen=True)
class Cone:
    kind: ConeKind
    indices: tuple[int, ...]

    @property
    def heads(self) -> tuple[int, ...]:
        return self.indices[:1] if self.kind == "soc" else self.indices[:2]

    def violation(self, x: np.ndarray) -> float:
        v = x[list(self.indices)]
        if self.kind == "soc":
            return max(float(np.linalg.norm(v[1:]) - v[0]), 0.0)
        u, w, tail = v[0], v[1], v[2:]
        # distance-like measure of ||tail||^2 <= 2uw after the usual mapping
        return max(float(np.hypot(np.linalg.norm(tail), (u - w) / np.sqrt(2)) - (u + w) / np.sqrt(2)), 0.0)


@dataclass(frozen=True, eq=False)
class ConicProgram:
    c: np.ndarray
    c0: float
    A: sp.csr_matrix
    b: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    cones: tuple[Cone, ...]
    var_names: tuple[str, ...] = ()
    row_labels: tuple[str, ...] = ()
    meta: Mapping[str, object] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x + self.c0)

    def validate(self) -> list[str]:
        """Structural problems; empty when the program is well formed."""
        out = []
        n = self.n
        if self.A.shape[1] != n:
            out.append(f"A has {self.A.shape[1]} columns, expected {n}")
        if len(self.b) != self.A.shape[0]:
            out.append("b length does not match the row count")
        if len(self.lb) != n or len(self.ub) != n:
            out.append("bound vectors have the wrong length")
        elif np.any(self.lb > self.ub):
            out.append(f"{int(np.sum(self.lb > self.ub))} variables have lb > ub")
        if not np.all(np.isfinite(self.c)) or not np.all(np.isfinite(self.b)):
            out.append("non-finite objective or right-hand side")
        A = self.A
        for i in range(A.shape[0]):
            cols = A.indices[A.indptr[i]:A.indptr[i + 1]]
            if len(cols) > 1 and np.any(np.diff(cols) <= 0):
                out.append(f"row {i}: column indices not sorted and unique")
                break
        heads: set[int] = set()
        for k, cone in enumerate(self.cones):
            need = 2 if cone.kind == "soc" else 3
            if len(cone.indices) < need:
                out.append(f"cone {k}: too few entries")
            if any(i < 0 or i >= n for i in cone.indices):
                out.append(f"cone {k}: index out of range")
                continue
            if len(set(cone.indices)) != len(cone.indices):
                out.append(f"cone {k}: repeated variable")
            for h in cone.heads:
                if h in heads:
                    out.append(f"cone {k}: variable {h} already heads another cone")
                heads.add(h)
        if self.var_names and len(self.var_names) != n:
            out.append("var_names length mismatch")
        if self.row_labels and len(self.row_labels) != self.A.shape[0]:
            out.append("row_labels length mismatch")
        return out

    def residuals(self, x: np.ndarray) -> dict[str, float]:
        """Primal infeasibility of a candidate point, by constraint family."""
        eq = float(np.max(np.abs(self.A @ x - self.b), initial=0.0))
        bnd = float(np.max(np.maximum(self.lb - x, 0.0), initial=0.0))
        bnd = max(bnd, float(np.max(np.maximum(x - self.ub, 0.0), initial=0.0)))
        cone = max((c.violation(x) for c in self.cones), default=0.0)
        return {"equality": eq, "bounds": bnd, "cones": cone, "max": max(eq, bnd, cone)}

    def same_as(self, other: "ConicProgram", rtol: float = 0.0) -> bool:
        """Structural and numeric equality (exact when rtol is 0)."""
        if self.n != other.n or self.m != other.m or self.cones != other.cones:
            return False
        diff = abs(self.A - other.A)
        if diff.nnz and diff.max() > rtol * max(1.0, abs(self.A).max()):
            return False

        def close(a, b):
            a, b = np.asarray(a, float), np.asarray(b, float)
            fin = np.isfinite(a)
            if not np.array_equal(fin, np.isfinite(b)) or not np.array_equal(a[~fin], b[~fin]):
                return False
            return bool(np.all(np.abs(a[fin] - b[fin]) <= rtol * np.maximum(1.0, np.abs(a[fin]))))

        return (close(self.c, other.c) and close([self.c0], [other.c0]) and close(self.b, other.b)
                and close(self.lb, other.lb) and close(self.ub, other.ub))


class Expr:
    """Affine expression sum(coef * var) + const over variable indices."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Mapping[int, float] | None = None, const: float = 0.0):
        self.terms: dict[int, float] = dict(terms) if terms else {}
        self.const = float(const)

    @classmethod
    def _own(cls, terms: dict[int, float], const: float) -> "Expr":
        # takes ownership of ``terms`` without copying (hot path in large builds)
        e = cls.__new__(cls)
        e.terms = terms
        e.const = const
        return e

    @staticmethod
    def var(i: int, coef: float = 1.0) -> "Expr":
        return Expr._own({i: float(coef)}, 0.0)

    def copy(self) -> "Expr":
        return Expr._own(dict(self.terms), self.const)

    def add(self, other: "Expr | float", scale: float = 1.0) -> "Expr":
        if isinstance(other, Expr):
            t = self.terms
            get = t.get
            if scale == 1.0:
                for k, v in other.terms.items():
                    t[k] = get(k, 0.0) + v
            else:
                for k, v in other.terms.items():
                    t[k] = get(k, 0.0) + scale * v
            self.const += scale * other.const
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other):
        return self.copy().add(other)

    def __radd__(self, other):
        return self.copy().add(other)

    def __sub__(self, other):
        return self.copy().add(other, -1.0)

    def __rsub__(self, other):
        return (-self).add(other)

    def __mul__(self, k: float) -> "Expr":
        return Expr._own({i: v * k for i, v in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Expr":
        return self * -1.0

    def value(self, x: np.ndarray) -> float:
        return sum(v * x[i] for i, v in self.terms.items()) + self.const

    def pruned(self) -> "Expr":
        return Expr._own({k: v for k, v in self.terms.items() if v != 0.0}, self.const)

    def single_var(self) -> int | None:
        """Index if the expression is exactly one variable with unit weight."""
        t = self.pruned().terms
        if self.const == 0.0 and len(t) == 1:
            (i, v), = t.items()
            if v == 1.0:
                return i
        return None


@dataclass
class AuxDefinition:
    """An auxiliary variable equal to an affine function of others."""

    index: int
    expr: Expr


class ModelBuilder:
    """Incremental construction of a ConicProgram with named variables.

    Inequalities receive slack variables and cone entries that are not
    plain variables receive defined auxiliaries; both kinds are recorded so
    that a point given on the named variables can be completed.
    """

    def __init__(self) -> None:
        self.names: list[str] = []
        self.index: dict[str, int] = {}
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.obj: dict[int, float] = {}
        self.obj_const = 0.0
        self.rows: list[tuple[dict[int, float], float, str]] = []
        self.cones: list[Cone] = []
        self.aux: list[AuxDefinition] = []
        self.groups: dict[str, list[str]] = {}
        self._heads: set[int] = set()

    # variables
    def add_var(self, name: str, lb: float = -np.inf, ub: float = np.inf, group: str | None = None) -> int:
        if name in self.index:
            raise KeyError(f"variable {name!r} defined twice")
        i = len(self.names)
        self.names.append(name)
        self.index[name] = i
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        if group:
            self.groups.setdefault(group, []).append(name)
        return i

    def v(self, name: str) -> Expr:
        return Expr.var(self.index[name])

    def tighten(self, i: int, lb: float | None = None, ub: float | None = None) -> None:
        if lb is not None:
            self.lb[i] = max(self.lb[i], lb)
        if ub is not None:
            self.ub[i] = min(self.ub[i], ub)

    def define(self, name: str, expr: Expr, lb: float = -np.inf, ub: float = np.inf,
               group: str | None = None) -> int:
        """New variable tied to ``expr`` by an equality row."""
        i = self.add_var(name, lb, ub, group)
        self.add_eq(Expr.var(i) - expr, 0.0, f"def:{name}")
        self.aux.append(AuxDefinition(i, expr.pruned()))
        return i

    # rows
    def add_eq(self, expr: Expr, rhs: float, label: str) -> None:
        e = expr.pruned()
        terms = {k: v for k, v in sorted(e.terms.items())}
        if not terms:
            if abs(rhs - e.const) > 1e-12:
                raise ValueError(f"row {label} is constant and violated")
            return
        self.rows.append((terms, float(rhs) - e.const, label))

    def add_le(self, expr: Expr, rhs: float, label: str) -> None:
        """expr <= rhs, as expr + slack == rhs with slack >= 0."""
        e = expr.pruned()
        if not e.terms:
            if e.const > rhs + 1e-12:
                raise ValueError(f"row {label} is constant and violated")
            return
        s = self.add_var(f"slack:{label}#{len(self.names)}", 0.0, np.inf)
        self.add_eq(e + Expr.var(s), rhs, label)
        self.aux.append(AuxDefinition(s, Expr(e.terms, e.const - rhs) * -1.0))

    def add_ge(self, expr: Expr, rhs: float, label: str) -> None:
        self.add_le(-expr, -rhs, label)

    def add_rel(self, expr: Expr, sense: str, rhs: float, label: str) -> None:
        if sense == "<=":
            self.add_le(expr, rhs, label)
        elif sense == ">=":
            self.add_ge(expr, rhs, label)
        else:
            self.add_eq(expr, rhs, label)

    # cones
    def _entry(self, e: Expr, label: str, head: bool) -> int:
        if not e.pruned().terms:
            return self.constant(f"const:{label}#{len(self.names)}", e.const)
        i = e.single_var()
        if i is not None and not (head and i in self._heads):
            return i
        j = self.define(f"cone:{label}#{len(self.names)}", e)
        return j

    def add_soc(self, head: Expr, tail: list[Expr], label: str) -> None:
        h = self._entry(head, label, True)
        self._heads.add(h)
        idx = [h]
        for e in tail:
            j = self._entry(e, label, False)
            if j in idx:
                j = self.define(f"cone:{label}#{len(self.names)}", Expr.var(j))
            idx.append(j)
        self.cones.append(Cone("soc", tuple(idx)))

    def add_rsoc(self, u: Expr, w: Expr, tail: list[Expr], label: str) -> None:
        """||tail||^2 <= 2 u w, u, w >= 0."""
        iu = self._entry(u, label, True)
        self._heads.add(iu)
        iw = self._entry(w, label, True)
        if iw == iu:
            iw = self.define(f"cone:{label}#{len(self.names)}", Expr.var(iu))
        self._heads.add(iw)
        idx = [iu, iw]
        for e in tail:
            j = self._entry(e, label, False)
            if j in idx:
                j = self.define(f"cone:{label}#{len(self.names)}", Expr.var(j))
            idx.append(j)
        self.cones.append(Cone("rsoc", tuple(idx)))

    def constant(self, name: str, value: float) -> int:
        return self.add_var(name, value, value)

    def add_objective(self, expr: Expr) -> None:
        for k, v in expr.terms.items():
            self.obj[k] = self.obj.get(k, 0.0) + v
        self.obj_const += expr.const

    def build(self, meta: Mapping[str, object] | None = None) -> ConicProgram:
        n = len(self.names)
        c = np.zeros(n)
        for k, v in self.obj.items():
            c[k] = v
        data, indices, indptr, b, labels = [], [], [0], [], []
        for terms, rhs, label in self.rows:
            for k, v in terms.items():
                indices.append(k)
                data.append(v)
            indptr.append(len(indices))
            b.append(rhs)
            labels.append(label)
        A = sp.csr_matrix((np.array(data, float), np.array(indices, dtype=np.int64),
                           np.array(indptr, dtype=np.int64)), shape=(len(b), n))
        return ConicProgram(c=c, c0=self.obj_const, A=A, b=np.array(b, float),
                            lb=np.array(self.lb, float), ub=np.array(self.ub, float),
                            cones=tuple(self.cones), var_names=tuple(self.names),
                            row_labels=tuple(labels), meta=dict(meta or {}))

    def complete(self, values: Mapping[str, float], default: float = 0.0) -> np.ndarray:
        """Full variable vector from named values, filling defined auxiliaries."""
        x = np.full(len(self.names), default)
        for name, v in values.items():
            x[self.index[name]] = v
        for d in self.aux:
            x[d.index] = d.expr.value(x)
        return x
