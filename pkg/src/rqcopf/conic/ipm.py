"""Homogeneous self-dual interior-point method for second-order cone programs.

The program is brought to the standard form

    minimize c'x  subject to  A x = b,  G x + s = h,  s in K

where K is a product of a nonnegative orthant (finite variable bounds) and
second-order cones (rotated cones are mapped onto ordinary ones). Variables
without bounds stay free. The search direction uses Nesterov-Todd scaling
and Mehrotra's predictor-corrector; every linear system is the regularized
quasi-definite KKT matrix, factorized once per iteration and refined
against the unregularized one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .program import ConicProgram

_XP = np.longdouble

Status = Literal["Optimal", "Infeasible", "Unbounded", "NumericalFailure"]
SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-8
    gap: float = 1e-8
    max_iter: int = 200
    reg: float = 1e-8
    refine: int = 8
    equilibrate: bool = True


# ---------------------------------------------------------------- standard form

@dataclass
class StandardForm:
    """Standard-form data plus the maps back to program variables."""

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    n_orth: int
    soc_dims: list[int]
    free_cols: np.ndarray      # program index of each standard-form column
    fixed_x: np.ndarray        # program-sized vector holding fixed values (0 elsewhere)
    eq_rows: np.ndarray        # program row index of each kept equality row
    obj_const: float
    orth_info: list[tuple[int, int]] = field(default_factory=list)  # (program var, +1 lower / -1 upper)


def standard_form(prog: ConicProgram) -> StandardForm:
    n = prog.n
    fixed = prog.lb == prog.ub
    keep = np.flatnonzero(~fixed)
    col_of = -np.ones(n, dtype=np.int64)
    col_of[keep] = np.arange(len(keep))
    fixed_x = np.where(fixed, prog.lb, 0.0)
    fixed_x[~np.isfinite(fixed_x)] = 0.0

    A = prog.A.tocsc()
    b = prog.b - A[:, np.flatnonzero(fixed)] @ fixed_x[fixed]
    A = A[:, keep].tocsr()
    nnz_per_row = np.diff(A.indptr)
    empty = nnz_per_row == 0
    if np.any(np.abs(b[empty]) > 1e-9 * (1 + np.abs(prog.b[empty]))):
        bad = int(np.flatnonzero(empty & (np.abs(b) > 1e-9))[0])
        raise InfeasiblePresolve(f"row {bad} reduces to a violated constant")
    rows = np.flatnonzero(~empty)
    A = A[rows]
    b = b[rows]
    c = prog.c[keep]
    obj_const = prog.c0 + float(prog.c[fixed] @ fixed_x[fixed])

    g_rows, g_cols, g_vals, h = [], [], [], []
    orth_info = []
    r = 0
    for j in keep:
        if np.isfinite(prog.lb[j]):
            # -x + s = -lb
            g_rows.append(r); g_cols.append(col_of[j]); g_vals.append(-1.0); h.append(-prog.lb[j])
            orth_info.append((int(j), 1)); r += 1
        if np.isfinite(prog.ub[j]):
            g_rows.append(r); g_cols.append(col_of[j]); g_vals.append(1.0); h.append(prog.ub[j])
            orth_info.append((int(j), -1)); r += 1
    n_orth = r
    soc_dims = []

    def put(entry: list[tuple[int, float]], const: float):
        nonlocal r
        # s_r = const_part - G_r x  where entry is the linear form giving s
        for j, coef in entry:
            if fixed[j]:
                const += coef * fixed_x[j]
            else:
                g_rows.append(r); g_cols.append(col_of[j]); g_vals.append(-coef)
        h.append(const)
        r += 1

    for cone in prog.cones:
        idx = cone.indices
        if cone.kind == "soc":
            for j in idx:
                put([(j, 1.0)], 0.0)
            soc_dims.append(len(idx))
        else:
            u, v = idx[0], idx[1]
            put([(u, SQRT_HALF), (v, SQRT_HALF)], 0.0)
            put([(u, SQRT_HALF), (v, -SQRT_HALF)], 0.0)
            for j in idx[2:]:
                put([(j, 1.0)], 0.0)
            soc_dims.append(len(idx))
    G = sp.csr_matrix((g_vals, (g_rows, g_cols)), shape=(r, len(keep)))
    return StandardForm(c=c, A=A, b=b, G=G, h=np.array(h, float), n_orth=n_orth,
                        soc_dims=soc_dims, free_cols=keep, fixed_x=fixed_x,
                        eq_rows=rows, obj_const=obj_const, orth_info=orth_info)


class InfeasiblePresolve(ValueError):
    pass


# ---------------------------------------------------------------- cone algebra

class ConeOps:
    """Vectorized Jordan-algebra operations on an orthant and a set of SOCs.

    Second-order cones of equal dimension are processed together as 2-D
    index arrays.
    """

    def __init__(self, n_orth: int, soc_dims: list[int]):
        self.l = n_orth
        self.dims = list(soc_dims)
        self.m = n_orth + sum(soc_dims)
        self.degree = n_orth + len(soc_dims)
        self.groups: list[np.ndarray] = []
        starts = np.cumsum([n_orth] + self.dims[:-1]) if self.dims else np.array([], int)
        by_dim: dict[int, list[int]] = {}
        for st, d in zip(starts, self.dims):
            by_dim.setdefault(d, []).append(int(st))
        for d in sorted(by_dim):
            st = np.array(by_dim[d])
            self.groups.append(st[:, None] + np.arange(d)[None, :])
        self.e = np.zeros(self.m)
        self.e[:n_orth] = 1.0
        for st in starts:
            self.e[int(st)] = 1.0

    # residual of membership: inf{a : x + a e in K}
    def outside(self, x: np.ndarray) -> float:
        worst = -np.inf
        if self.l:
            worst = float(np.max(-x[:self.l]))
        for I in self.groups:
            X = x[I]
            worst = max(worst, float(np.max(np.linalg.norm(X[:, 1:], axis=1) - X[:, 0])))
        return worst

    def interior_shift(self, x: np.ndarray) -> np.ndarray:
        a = self.outside(x)
        if a < 0:
            return x.copy()
        return x + (1.0 + a) * self.e

    def jdot(self, X: np.ndarray) -> np.ndarray:
        return X[:, 0] ** 2 - np.sum(X[:, 1:] ** 2, axis=1)

    def nt_scaling(self, s: np.ndarray, z: np.ndarray) -> "Scaling":
        sc = Scaling(self)
        if self.l:
            sc.d = np.sqrt(s[:self.l] / z[:self.l])
        for I in self.groups:
            S, Z = s[I], z[I]
            sn = np.sqrt(np.maximum(_jdet(S), 1e-300))
            zn = np.sqrt(np.maximum(_jdet(Z), 1e-300))
            Sb, Zb = S / sn[:, None], Z / zn[:, None]
            gamma = np.sqrt(np.maximum((1.0 + np.sum(Sb * Zb, axis=1)) / 2.0, 1e-300))
            Jz = Zb.copy()
            Jz[:, 1:] *= -1
            W = (Sb + Jz) / (2 * gamma)[:, None]
            # renormalize so that w0^2 - |w1|^2 = 1 exactly
            W[:, 0] = np.sqrt(1.0 + np.sum(W[:, 1:] ** 2, axis=1))
            sc.eta.append(np.sqrt(sn / zn))
            sc.w.append(W)
        return sc

    def product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(u)
        out[:self.l] = u[:self.l] * v[:self.l]
        for I in self.groups:
            U, V = u[I], v[I]
            res = np.empty_like(U)
            res[:, 0] = np.sum(U * V, axis=1)
            res[:, 1:] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
            out[I] = res
        return out

    def divide(self, lam: np.ndarray, d: np.ndarray) -> np.ndarray:
        """x with lam o x = d."""
        out = np.empty_like(d)
        out[:self.l] = d[:self.l] / lam[:self.l]
        for I in self.groups:
            L, D = lam[I], d[I]
            det = _jdet(L)
            x0 = (L[:, 0] * D[:, 0] - np.sum(L[:, 1:] * D[:, 1:], axis=1)) / det
            X = np.empty_like(D)
            X[:, 0] = x0
            X[:, 1:] = (D[:, 1:] - x0[:, None] * L[:, 1:]) / L[:, :1]
            out[I] = X
        return out

    def max_step(self, x: np.ndarray, dx: np.ndarray) -> float:
        """Largest a with x + a dx in the cone (x interior)."""
        a = np.inf
        if self.l:
            neg = dx[:self.l] < 0
            if np.any(neg):
                a = min(a, float(np.min(-x[:self.l][neg] / dx[:self.l][neg])))
        for I in self.groups:
            X, D = x[I], dx[I]
            nx = np.sqrt(np.maximum(_jdet(X), 1e-300))
            Xb = X / nx[:, None]
            Db = D / nx[:, None]
            # rho = H(xb)^{-1} db with xb on the unit hyperboloid: J-reflection of xb
            r0 = Xb[:, 0] * Db[:, 0] - np.sum(Xb[:, 1:] * Db[:, 1:], axis=1)
            t = (r0 + Db[:, 0]) / (Xb[:, 0] + 1.0)
            R1 = Db[:, 1:] - t[:, None] * Xb[:, 1:]
            denom = np.linalg.norm(R1, axis=1) - r0
            pos = denom > 0
            if np.any(pos):
                a = min(a, float(np.min(1.0 / denom[pos])))
        return a

    def pairing(self, s, z) -> float:
        return float(s @ z)


def _jdet(X: np.ndarray) -> np.ndarray:
    n1 = np.linalg.norm(X[:, 1:], axis=1)
    return (X[:, 0] - n1) * (X[:, 0] + n1)


class Scaling:
    def __init__(self, ops: ConeOps):
        self.ops = ops
        self.d = np.zeros(ops.l)
        self.eta: list[np.ndarray] = []
        self.w: list[np.ndarray] = []

    def apply(self, v: np.ndarray, inverse: bool = False) -> np.ndarray:
        ops = self.ops
        out = np.empty_like(v)
        out[:ops.l] = v[:ops.l] / self.d if inverse else v[:ops.l] * self.d
        for I, eta, W in zip(ops.groups, self.eta, self.w):
            V = v[I]
            w0, w1 = W[:, 0], W[:, 1:]
            v0, v1 = V[:, 0], V[:, 1:]
            dot = np.sum(w1 * v1, axis=1)
            R = np.empty_like(V)
            if not inverse:
                R[:, 0] = w0 * v0 + dot
                R[:, 1:] = v1 + ((v0 + dot / (1 + w0)))[:, None] * w1
                R *= eta[:, None]
            else:
                R[:, 0] = w0 * v0 - dot
                R[:, 1:] = v1 + ((-v0 + dot / (1 + w0)))[:, None] * w1
                R /= eta[:, None]
            out[I] = R
        return out

    def inverse_block(self) -> sp.csr_matrix:
        """W^{-1} as a sparse block-diagonal matrix (symmetric)."""
        ops = self.ops
        rows, cols, vals = [np.arange(ops.l)], [np.arange(ops.l)], [1.0 / self.d]
        for I, eta, W in zip(ops.groups, self.eta, self.w):
            k, d = I.shape
            w0, w1 = W[:, 0], W[:, 1:]
            M = np.zeros((k, d, d), dtype=W.dtype)
            M[:, 0, 0] = w0
            M[:, 0, 1:] = -w1
            M[:, 1:, 0] = -w1
            M[:, 1:, 1:] = w1[:, :, None] * w1[:, None, :] / (1 + w0)[:, None, None]
            M[:, np.arange(1, d), np.arange(1, d)] += 1.0
            M /= eta[:, None, None]
            rows.append(np.repeat(I, d, axis=1).ravel())
            cols.append(np.tile(I, (1, d)).ravel())
            vals.append(M.reshape(k, d * d).ravel())
        return sp.csr_matrix((np.concatenate(vals).astype(float),
                              (np.concatenate(rows), np.concatenate(cols))), shape=(ops.m, ops.m))


# ---------------------------------------------------------------- report

@dataclass(frozen=True, eq=False)
class SolveReport:
    status: Status
    primal_objective: float
    dual_objective: float
    x: np.ndarray | None
    y: np.ndarray | None          # equality multipliers, program row order
    z: np.ndarray | None          # cone multipliers in standard-form order
    s: np.ndarray | None
    iterations: int
    kkt: dict[str, float]
    wall_time: float
    message: str = ""
    history: tuple[tuple[float, ...], ...] = ()

    @property
    def max_kkt(self) -> float:
        return max(self.kkt.values(), default=float("nan"))

    def to_dict(self) -> dict:
        return {"status": self.status, "primal_objective": self.primal_objective,
                "dual_objective": self.dual_objective, "iterations": self.iterations,
                "kkt": self.kkt, "wall_time": self.wall_time, "message": self.message}


# ---------------------------------------------------------------- equilibration

def _equilibrate(sf: StandardForm, ops: ConeOps, passes: int = 12):
    """Ruiz scaling: D on columns, E on rows (uniform inside each cone)."""
    n = len(sf.c)
    D = np.ones(n)
    EA = np.ones(sf.A.shape[0])
    EG = np.ones(sf.G.shape[0])
    A, G = sf.A.copy(), sf.G.copy()
    for _ in range(passes):
        M = sp.vstack([A, G]).tocsc()
        col = np.sqrt(np.maximum(abs(M).max(axis=0).toarray().ravel(), 1e-8))
        col[col == 0] = 1.0
        ra = np.sqrt(np.maximum(abs(A).max(axis=1).toarray().ravel(), 1e-8)) if A.shape[0] else np.ones(0)
        rg = np.sqrt(np.maximum(abs(G).max(axis=1).toarray().ravel(), 1e-8)) if G.shape[0] else np.ones(0)
        for I in ops.groups:
            rg[I] = np.max(rg[I], axis=1, keepdims=True)
        dc = 1.0 / col
        A = sp.diags(1.0 / ra) @ A @ sp.diags(dc)
        G = sp.diags(1.0 / rg) @ G @ sp.diags(dc)
        D *= dc
        EA /= ra
        EG /= rg
    c = sf.c * D
    b = sf.b * EA
    h = sf.h * EG
    return A.tocsr(), G.tocsr(), c, b, h, D, EA, EG


# ---------------------------------------------------------------- solver

class _KKT:
    """Scaled KKT system.

    With Gs = W^{-1} G and dz = W^{-1} u the cone block becomes -I, so the
    factored matrix never contains W^2 (whose conditioning is the square of
    W's and exceeds double precision near the optimum).
    """

    def __init__(self, A, G, reg, refine):
        self.A, self.G = A.tocsr(), G.tocsr()
        self.n, self.p, self.m = A.shape[1], A.shape[0], G.shape[0]
        self.reg = reg
        self.refine = refine
        self.Winv = sp.identity(self.m, format="csr")

    def factor(self, scaling: "Scaling | None"):
        n, p, m, d = self.n, self.p, self.m, self.reg
        self.Winv = scaling.inverse_block() if scaling is not None else sp.identity(m, format="csr")
        Gs = (self.Winv @ self.G).tocsc()
        self.K = sp.bmat([[sp.csc_matrix((n, n)), self.A.T, Gs.T],
                          [self.A, None, None],
                          [Gs, None, -sp.identity(m)]], format="csc")
        reg = np.concatenate([np.full(n, d), np.full(p, -d), np.zeros(m)])
        Kr = (self.K + sp.diags(reg)).tocsc()
        self.lu = spla.splu(Kr, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                            options={"SymmetricMode": True})

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        n, p = self.n, self.p
        rhs = np.asarray(rhs, dtype=float).copy()
        rhs[n + p:] = self.Winv @ rhs[n + p:]
        x = self.lu.solve(rhs)
        nr = _inf(rhs)
        last = np.inf
        for _ in range(self.refine):
            r = rhs - self.K @ x
            e = _inf(r)
            if e <= 1e-14 * (1 + nr) or e > 0.5 * last:
                break
            last = e
            x = x + self.lu.solve(r)
        x[n + p:] = self.Winv @ x[n + p:]
        return x


def solve(prog: ConicProgram, tol: Tolerances | None = None, verbose: bool = False) -> SolveReport:
    tol = tol or Tolerances()
    t0 = time.perf_counter()
    problems = prog.validate()
    if problems:
        raise ValueError("malformed program: " + "; ".join(problems[:5]))
    try:
        sf = standard_form(prog)
    except InfeasiblePresolve as exc:
        return SolveReport("Infeasible", math.inf, math.inf, None, None, None, None, 0, {},
                           time.perf_counter() - t0, str(exc))
    ops = ConeOps(sf.n_orth, sf.soc_dims)
    if tol.equilibrate:
        A, G, c, b, h, D, EA, EG = _equilibrate(sf, ops)
    else:
        A, G, c, b, h = sf.A, sf.G, sf.c, sf.b, sf.h
        D, EA, EG = np.ones(len(c)), np.ones(len(b)), np.ones(len(h))
    # normalize the cost by a power of two: the iterates (and hence the
    # outcome) no longer depend on the objective's units
    cmax = float(np.max(np.abs(c), initial=0.0))
    cs = 2.0 ** round(math.log2(cmax)) if cmax > 0 else 1.0
    c = c / cs
    n, p, m = len(c), len(b), len(h)
    kkt = _KKT(A, G, tol.reg, tol.refine)

    # unscaled norms for relative residuals
    nb0, nh0, nc0 = _scale(sf.b), _scale(sf.h), _scale(sf.c)

    def unscale(x, y, z, s, tau):
        z, s = np.asarray(z, float), np.asarray(s, float)
        return D * x / tau, EA * y * (cs / tau), EG * z * (cs / tau), s / EG / tau

    # initial point
    kkt.factor(None)
    sol = kkt.solve(np.concatenate([np.zeros(n), b, h]))
    x = sol[:n]
    s = ops.interior_shift(-sol[n + p:])
    sol = kkt.solve(np.concatenate([-c, np.zeros(p), np.zeros(m)]))
    y = sol[n:n + p]
    z = ops.interior_shift(sol[n + p:])
    # cone iterates carry extended precision: near the boundary x0 - |x1| cancels
    # badly in float64 and the NT scaling loses definiteness
    s, z = s.astype(_XP), z.astype(_XP)
    tau, kappa = 1.0, 1.0

    history = []
    status: Status = "NumericalFailure"
    message = "iteration limit reached"
    it = 0
    best = None
    for it in range(tol.max_iter + 1):
        rx = A.T @ y + G.T @ np.asarray(z, float) + c * tau
        ry = A @ x - b * tau
        rz = G @ x + s - h * tau
        cx, by, hz = c @ x, b @ y, float(h @ z)
        rt = kappa + cx + by + hz
        mu = float(s @ z + tau * kappa) / (ops.degree + 1)

        # convergence checks on the unscaled problem
        xu, yu, zu, su = unscale(x, y, z, s, tau)
        pres = max(_inf(sf.A @ xu - sf.b) / nb0,
                   _inf(sf.G @ xu + su - sf.h) / nh0)
        dres = _inf(sf.A.T @ yu + sf.G.T @ zu + sf.c) / nc0
        pobj = float(sf.c @ xu)
        dobj = float(-sf.b @ yu - sf.h @ zu)
        gap = float(su @ zu)
        history.append((it, pobj + sf.obj_const, dobj + sf.obj_const, pres, dres, gap, mu, tau, kappa))
        if verbose:
            print(f"{it:3d} p={pobj:+.9e} d={dobj:+.9e} pres={pres:.1e} dres={dres:.1e} "
                  f"gap={gap:.1e} tau={tau:.1e} kap={kappa:.1e}")
        scale = 1 + abs(pobj)
        if (pres <= tol.feas and dres <= tol.feas and abs(gap) <= tol.gap * scale
                and abs(pobj - dobj) <= tol.gap * scale):
            status, message = "Optimal", "converged"
            break
        score = max(pres, dres, abs(gap) / scale, abs(pobj - dobj) / scale)
        if np.isfinite(score) and (best is None or score < best[0]):
            best = (score, x.copy(), y.copy(), z.copy(), s.copy(), tau)
        # certificates (raw iterates, tau-independent)
        bhz = by + hz
        if bhz < 0:
            xr, yr, zr, sr = unscale(x, y, z, s, 1.0)
            lhs = _inf(sf.A.T @ yr + sf.G.T @ zr)
            denom = -float(sf.b @ yr + sf.h @ zr)
            if denom > 0 and lhs <= tol.feas * denom and tau < kappa:
                status, message = "Infeasible", "primal infeasibility certificate"
                break
        if cx < 0:
            xr, yr, zr, sr = unscale(x, y, z, s, 1.0)
            lhs = max(_inf(sf.A @ xr), _inf(sf.G @ xr + sr))
            denom = -float(sf.c @ xr)
            if denom > 0 and lhs <= tol.feas * denom and tau < kappa:
                status, message = "Unbounded", "dual infeasibility certificate"
                break
        if it == tol.max_iter:
            break

        try:
            sc = ops.nt_scaling(s, z)
            lam = sc.apply(z)
            kkt.factor(sc)
        except (RuntimeError, FloatingPointError, ValueError) as exc:
            message = f"factorization failed: {exc}"
            break

        sol1 = kkt.solve(np.concatenate([-c, b, h]))
        x1, y1, z1 = sol1[:n], sol1[n:n + p], sol1[n + p:]
        den_base = c @ x1 + b @ y1 + h @ z1

        def direction(sigma, ds, dk):
            rhs = np.concatenate([-(1 - sigma) * rx, -(1 - sigma) * ry,
                                  -(1 - sigma) * rz - sc.apply(ops.divide(lam, ds))])
            sol2 = kkt.solve(rhs)
            x2, y2, z2 = sol2[:n], sol2[n:n + p], sol2[n + p:]
            dtau = ((-(1 - sigma) * rt - dk / tau - (c @ x2 + b @ y2 + h @ z2))
                    / (den_base - kappa / tau))
            dx = x2 + dtau * x1
            dy = y2 + dtau * y1
            dz = z2 + dtau * z1
            # slack step from the primal linearization keeps G dx + ds consistent
            dss = -(1 - sigma) * rz + h * dtau - G @ dx
            dkap = (dk - kappa * dtau) / tau
            return dx, dy, dz, dss, dtau, dkap

        def step_length(dz, dss, dtau, dkap):
            a = min(ops.max_step(s, dss), ops.max_step(z, dz))
            if dtau < 0:
                a = min(a, -tau / dtau)
            if dkap < 0:
                a = min(a, -kappa / dkap)
            return a

        # predictor
        ds_aff = -ops.product(lam, lam)
        dk_aff = -tau * kappa
        dxa, dya, dza, dsa, dta, dka = direction(0.0, ds_aff, dk_aff)
        a_aff = min(1.0, step_length(dza, dsa, dta, dka))
        sigma = min(1.0, max(0.0, (1 - a_aff) ** 3))
        # corrector
        wds = sc.apply(dsa, inverse=True)
        wdz = sc.apply(dza)
        ds_c = -ops.product(lam, lam) - ops.product(wds, wdz) + sigma * mu * _unit(ops)
        dk_c = -tau * kappa - dta * dka + sigma * mu
        dx, dy, dz, dss, dtau, dkap = direction(sigma, ds_c, dk_c)
        a = min(1.0, 0.99 * step_length(dz, dss, dtau, dkap))
        if not np.isfinite(a) or a <= 0:
            message = "step length collapsed"
            break
        x = x + a * dx
        y = y + a * dy
        z = z + a * dz
        s = s + a * dss
        tau = tau + a * dtau
        kappa = kappa + a * dkap
        if not (np.all(np.isfinite(x)) and np.isfinite(tau)):
            message = "non-finite iterate"
            break

    wall = time.perf_counter() - t0
    if status == "NumericalFailure" and best is not None:
        _, x, y, z, s, tau = best
    if status == "Infeasible" or status == "Unbounded":
        xu, yu, zu, su = unscale(x, y, z, s, 1.0)
        if status == "Infeasible":
            k = -float(sf.b @ yu + sf.h @ zu)
            yu, zu = yu / k, zu / k
        else:
            k = -float(sf.c @ xu)
            xu, su = xu / k, su / k
    else:
        xu, yu, zu, su = unscale(x, y, z, s, tau)
    xfull = sf.fixed_x.copy()
    xfull[sf.free_cols] = xu
    yfull = np.zeros(prog.m)
    yfull[sf.eq_rows] = yu
    pobj = float(prog.objective(xfull)) if status != "Infeasible" else math.inf
    dobj = float(-sf.b @ yu - sf.h @ zu + sf.obj_const) if status not in ("Unbounded",) else -math.inf
    if status == "Infeasible":
        dobj = math.inf
    report = SolveReport(status, pobj, dobj, xfull, yfull, zu, su, it, {}, wall, message,
                         tuple(history))
    res = kkt_residuals(prog, report, sf)
    return SolveReport(status, pobj, dobj, xfull, yfull, zu, su, it, res, wall, message,
                       tuple(history))


def _scale(v: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(v), initial=0.0)))


def _inf(v: np.ndarray) -> float:
    return float(np.max(np.abs(v), initial=0.0))


def _unit(ops: ConeOps) -> np.ndarray:
    return ops.e


# ---------------------------------------------------------------- residuals

def kkt_residuals(prog: ConicProgram, report: SolveReport,
                  sf: StandardForm | None = None) -> dict[str, float]:
    """Max-norm optimality residuals, each relative to the data it involves.

    For an Optimal report: stationarity, primal feasibility (rows, bounds,
    cones), dual cone feasibility and complementarity. For an Infeasible
    report the Farkas residual of the certificate is returned instead.
    """
    if report.x is None or report.y is None or report.z is None:
        raise ValueError("report carries no primal/dual values")
    sf = sf or standard_form(prog)
    ops = ConeOps(sf.n_orth, sf.soc_dims)
    xs = report.x[sf.free_cols]
    y = report.y[sf.eq_rows]
    z = report.z
    nc = _scale(sf.c)
    if report.status == "Infeasible":
        far = _inf(sf.A.T @ y + sf.G.T @ z)
        return {"farkas": float(far), "dual_cone": max(ops.outside(z), 0.0),
                "certificate_value": float(-(sf.b @ y + sf.h @ z) - 1.0)}
    if report.status == "Unbounded":
        return {"ray_equality": float(_inf(sf.A @ xs))}
    s = sf.h - sf.G @ xs
    stat = _inf(sf.A.T @ y + sf.G.T @ z + sf.c) / nc
    peq = _inf(sf.A @ xs - sf.b) / _scale(sf.b)
    pcone = max(ops.outside(s), 0.0) / _scale(sf.h)
    dcone = max(ops.outside(z), 0.0) / _scale(z)
    comp = abs(float(s @ z)) / (1 + abs(report.primal_objective))
    return {"stationarity": float(stat), "primal_equality": float(peq),
            "primal_cone": float(pcone), "dual_cone": float(dcone),
            "complementarity": float(comp)}
