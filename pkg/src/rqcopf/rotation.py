"""Polar admittance flows and the complex base-power rotation.

Rotating the per-unit base power by an angle ``psi`` maps every complex power
S to ``S * exp(-1j * psi)``. Voltages are untouched, so a rotated and an
unrotated model share the same (V, theta) solutions; what changes is which
trigonometric arguments appear in the flow equations.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .caseio import Branch, NetworkCase


def to_polar_admittance(g: float, b: float) -> tuple[float, float]:
    """(Y, delta) with Y = |g + jb| and delta = atan2(b, g)."""
    if g == 0 and b == 0:
        raise ValueError("zero admittance has no polar angle")
    return math.hypot(g, b), math.atan2(b, g)


@dataclass(frozen=True)
class OperatingPoint:
    """Voltages keyed by bus id, dispatch listed in generator order."""

    vm: dict[int, float]
    va: dict[int, float]
    pg: tuple[float, ...]
    qg: tuple[float, ...]


def rectangular_flows(point: OperatingPoint, br: Branch) -> tuple[float, float, float, float]:
    """(P_lm, Q_lm, P_ml, Q_ml) for the pi model with tap and phase shift."""
    vl, vm = point.vm[br.from_bus], point.vm[br.to_bus]
    th = point.va[br.from_bus] - point.va[br.to_bus] - br.shift
    g, b, tau = br.g, br.b, br.tau
    bsh = b + br.b_c / 2
    vv = vl * vm / tau
    c, s = vv * math.cos(th), vv * math.sin(th)
    p_lm = g * vl * vl / tau**2 - g * c - b * s
    q_lm = -bsh * vl * vl / tau**2 + b * c - g * s
    p_ml = g * vm * vm - g * c + b * s
    q_ml = -bsh * vm * vm + b * c + g * s
    return p_lm, q_lm, p_ml, q_ml


def rotated_flows(point: OperatingPoint, br: Branch, psi: float) -> tuple[float, float, float, float]:
    """Flows in the rotated base, written with Y and delta.

    The sending end carries cos/sin(theta - delta - shift - psi) and the
    receiving end cos/sin(theta + delta - shift + psi).
    """
    vl, vm = point.vm[br.from_bus], point.vm[br.to_bus]
    th = point.va[br.from_bus] - point.va[br.to_bus] - br.shift
    Y, delta = to_polar_admittance(br.g, br.b)
    dh = delta + psi
    kp, kq = shunt_terms(Y, delta, br.b_c, psi)
    tau = br.tau
    vv = Y * vl * vm / tau
    p_lm = kp * vl * vl / tau**2 - vv * math.cos(th - dh)
    q_lm = kq * vl * vl / tau**2 - vv * math.sin(th - dh)
    p_ml = kp * vm * vm - vv * math.cos(th + dh)
    q_ml = kq * vm * vm + vv * math.sin(th + dh)
    return p_lm, q_lm, p_ml, q_ml


def shunt_terms(Y: float, delta: float, b_c: float, psi: float) -> tuple[float, float]:
    """Coefficients of the squared voltage in the rotated real/reactive flow."""
    dh = delta + psi
    kp = Y * math.cos(dh) - b_c / 2 * math.sin(psi)
    kq = -(Y * math.sin(dh) + b_c / 2 * math.cos(psi))
    return kp, kq


def rotate(p: float | np.ndarray, q: float | np.ndarray, psi: float):
    """(P~, Q~) = rotation of (P, Q) by -psi."""
    c, s = math.cos(psi), math.sin(psi)
    return c * p + s * q, -s * p + c * q


def inverse_rotation(p_tilde: float | np.ndarray, q_tilde: float | np.ndarray, psi: float):
    c, s = math.cos(psi), math.sin(psi)
    return c * p_tilde - s * q_tilde, s * p_tilde + c * q_tilde


@dataclass(frozen=True)
class RotationContext:
    psi: float
    cos_psi: float
    sin_psi: float
    p_demand: tuple[float, ...]
    q_demand: tuple[float, ...]

    def shunt(self, g_sh: float, b_sh: float) -> tuple[float, float]:
        """Rotated (real, reactive) shunt coefficients on w."""
        c, s = self.cos_psi, self.sin_psi
        return g_sh * c - b_sh * s, -(g_sh * s + b_sh * c)


def rotate_injections(case: NetworkCase, psi: float) -> RotationContext:
    """Rotated demands per bus (in case.buses order).

    Generator limits are not rotated; builders impose them on the
    inverse-rotated generation instead.
    """
    pd = np.array([b.p_demand for b in case.buses])
    qd = np.array([b.q_demand for b in case.buses])
    pt, qt = rotate(pd, qd, psi)
    return RotationContext(psi=psi, cos_psi=math.cos(psi), sin_psi=math.sin(psi),
                           p_demand=tuple(float(v) for v in pt),
                           q_demand=tuple(float(v) for v in qt))


def complex_rotation_error(point: OperatingPoint, br: Branch, psi: float) -> float:
    """max |S~ e^{j psi} - S| over both ends; zero up to rounding."""
    p, q, pr, qr = rectangular_flows(point, br)
    pt, qt, ptr, qtr = rotated_flows(point, br, psi)
    rot = cmath.exp(1j * psi)
    return max(abs(complex(pt, qt) * rot - complex(p, q)),
               abs(complex(ptr, qtr) * rot - complex(pr, qr)))


@dataclass(frozen=True)
class TerminalRelation:
    """Receiving-end trig terms as a rotation of the sending-end ones.

    [sin(u + dh); cos(u + dh)] = [[alpha, beta], [-beta, alpha]] @ [sin(u - dh); cos(u - dh)]
    for any u, where u = theta - shift.
    """

    alpha: float
    beta: float
    delta_hat: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.beta], [-self.beta, self.alpha]])


def terminal_relation(br: Branch, psi: float) -> TerminalRelation:
    dh = br.delta + psi
    c, s = math.cos(dh), math.sin(dh)
    return TerminalRelation(alpha=c * c - s * s, beta=2 * c * s, delta_hat=dh)


def sigma(br: Branch, psi: float) -> float:
    return br.delta + br.shift + psi


def parallel_relation(a: Branch, b: Branch, psi: float) -> np.ndarray:
    """Maps [sin(theta - sigma_a); cos(theta - sigma_a)] to the same for b."""
    if (a.from_bus, a.to_bus) != (b.from_bus, b.to_bus):
        raise ValueError("branches do not connect the same ordered bus pair")
    d = sigma(a, psi) - sigma(b, psi)
    c, s = math.cos(d), math.sin(d)
    return np.array([[c, s], [-s, c]])


def m_matrix(br: Branch, psi: float) -> np.ndarray:
    """Maps [sin(phi); cos(phi)], phi = theta - delta - shift - psi, to [cos(theta); sin(theta)]."""
    a = br.delta + br.shift + psi
    c, s = math.cos(a), math.sin(a)
    return np.array([[-s, c], [c, s]])


def bus_balance(case: NetworkCase, point: OperatingPoint,
                psi: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Signed real/reactive mismatch per bus, in the base rotated by psi."""
    idx = case.bus_index()
    n = len(case.buses)
    ctx = rotate_injections(case, psi)
    mis_p = np.zeros(n)
    mis_q = np.zeros(n)
    pg, qg = rotate(np.asarray(point.pg, float), np.asarray(point.qg, float), psi)
    for k, gen in enumerate(case.generators):
        mis_p[idx[gen.bus]] += pg[k]
        mis_q[idx[gen.bus]] += qg[k]
    for i, bus in enumerate(case.buses):
        w = point.vm[bus.id] ** 2
        gs, bs = ctx.shunt(bus.g_shunt, bus.b_shunt)
        mis_p[i] -= ctx.p_demand[i] + gs * w
        mis_q[i] -= ctx.q_demand[i] + bs * w
    for br in case.branches:
        flows = rotated_flows(point, br, psi) if psi else rectangular_flows(point, br)
        mis_p[idx[br.from_bus]] -= flows[0]
        mis_q[idx[br.from_bus]] -= flows[1]
        mis_p[idx[br.to_bus]] -= flows[2]
        mis_q[idx[br.to_bus]] -= flows[3]
    return mis_p, mis_q


def generation_cost(case: NetworkCase, pg: Sequence[float]) -> float:
    return float(sum(g.cost(p) for g, p in zip(case.generators, pg)))
