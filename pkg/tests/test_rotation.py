"""Rotation identities checked against direct complex arithmetic."""

import cmath
import math

import numpy as np
import pytest

from rqcopf.caseio import Branch
from rqcopf.rotation import (OperatingPoint, bus_balance, inverse_rotation, m_matrix,
                             parallel_relation, rectangular_flows, rotate, rotated_flows,
                             terminal_relation, to_polar_admittance)

rng = np.random.default_rng(20191211)


def random_branch(r=None):
    return Branch(1, 2, r=rng.uniform(1e-3, 0.2), x=rng.uniform(1e-3, 0.8) * rng.choice([-1, 1], p=[.1, .9]),
                  b_c=rng.uniform(0, 0.5), tau=rng.uniform(0.9, 1.1),
                  shift=math.radians(rng.uniform(-10, 10)))


def random_point():
    return OperatingPoint({1: rng.uniform(0.9, 1.1), 2: rng.uniform(0.9, 1.1)},
                          {1: rng.uniform(-0.6, 0.6), 2: rng.uniform(-0.6, 0.6)}, (), ())


def phasor_flows(pt, br):
    """Oracle: branch currents from the complex pi model with a complex tap."""
    v1 = cmath.rect(pt.vm[1], pt.va[1])
    v2 = cmath.rect(pt.vm[2], pt.va[2])
    y = 1 / complex(br.r, br.x)
    t = cmath.rect(br.tau, br.shift)
    ysh = 1j * br.b_c / 2
    i1 = (y + ysh) / (br.tau ** 2) * v1 - y / t.conjugate() * v2
    i2 = (y + ysh) * v2 - y / t * v1
    return v1 * i1.conjugate(), v2 * i2.conjugate()


def test_rectangular_flows_match_phasor_oracle():
    for _ in range(200):
        br, pt = random_branch(), random_point()
        s1, s2 = phasor_flows(pt, br)
        p1, q1, p2, q2 = rectangular_flows(pt, br)
        assert complex(p1, q1) == pytest.approx(s1, abs=1e-10)
        assert complex(p2, q2) == pytest.approx(s2, abs=1e-10)


def test_rotated_flows_are_rotated_rectangular_flows():
    worst = 0.0
    for _ in range(1000):
        br, pt = random_branch(), random_point()
        psi = rng.uniform(-math.pi, math.pi)
        p1, q1, p2, q2 = rectangular_flows(pt, br)
        r1, s1, r2, s2 = rotated_flows(pt, br, psi)
        rot = cmath.exp(-1j * psi)
        worst = max(worst, abs(complex(r1, s1) - complex(p1, q1) * rot),
                    abs(complex(r2, s2) - complex(p2, q2) * rot))
    assert worst <= 1e-10


def test_injection_round_trip():
    for psi in rng.uniform(-math.pi, math.pi, 1000):
        p, q = rng.normal(size=5), rng.normal(size=5)
        pt, qt = rotate(p, q, psi)
        assert np.allclose(pt + 1j * qt, (p + 1j * q) * np.exp(-1j * psi), atol=1e-12)
        p2, q2 = inverse_rotation(pt, qt, psi)
        assert np.max(np.abs(p2 - p)) <= 1e-10 and np.max(np.abs(q2 - q)) <= 1e-10


def test_terminal_relation_identity():
    for _ in range(500):
        br = random_branch()
        psi = rng.uniform(-math.pi, math.pi)
        u = rng.uniform(-2, 2)
        rel = terminal_relation(br, psi)
        dh = br.delta + psi
        lhs = np.array([math.sin(u + dh), math.cos(u + dh)])
        rhs = rel.matrix @ np.array([math.sin(u - dh), math.cos(u - dh)])
        assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_m_matrix_recovers_original_trig_terms():
    for _ in range(500):
        br = random_branch()
        psi = rng.uniform(-math.pi, math.pi)
        th = rng.uniform(-1.5, 1.5)
        phi = th - br.delta - br.shift - psi
        M = m_matrix(br, psi)
        got = M @ [math.sin(phi), math.cos(phi)]
        assert got == pytest.approx([math.cos(th), math.sin(th)], abs=1e-12)
        assert abs(np.linalg.det(M)) == pytest.approx(1.0)


def test_m_matrix_trivial_case_swaps():
    # zero admittance angle, no shift, no rotation: M = [[0,1],[1,0]]
    br = Branch(1, 2, r=1.0, x=0.0)
    assert br.delta == 0.0
    assert np.allclose(m_matrix(br, 0.0), [[0, 1], [1, 0]])


def test_parallel_relation():
    a, b = random_branch(), random_branch()
    psi = 0.3
    th = 0.2
    sa, sb = a.delta + a.shift + psi, b.delta + b.shift + psi
    got = parallel_relation(a, b, psi) @ [math.sin(th - sa), math.cos(th - sa)]
    assert got == pytest.approx([math.sin(th - sb), math.cos(th - sb)], abs=1e-12)


def test_polar_admittance():
    assert to_polar_admittance(0.6, -0.8) == pytest.approx((1.0, math.atan2(-0.8, 0.6)))
    with pytest.raises(ValueError):
        to_polar_admittance(0.0, 0.0)


def test_bus_balance_rotates_with_the_base(case5):
    from rqcopf.localopf import solve_local
    sol = solve_local(case5)
    p0, q0 = bus_balance(case5, sol.point)
    for psi in (0.4, -1.2, 2.5):
        p1, q1 = bus_balance(case5, sol.point, psi)
        assert np.allclose(p1 + 1j * q1, (p0 + 1j * q0) * np.exp(-1j * psi), atol=1e-10)
