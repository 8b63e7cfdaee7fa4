import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from saddlenode.errors import PoleOnRay, RejectedInput
from saddlenode.pscore import FLOAT, UniSeries
from saddlenode.summation import (borel_transform, directional_sum, gevrey_fit,
                                  laplace_sum, laplace_sum_detailed, lateral_jump,
                                  robust_pade, series_from_complex, singular_directions)

N = 30


def euler(sign=1, scale=1.0, n=N):
    """sum_k (sign)^k k! x^{k+1} / scale^k, Borel transform 1/(1 - sign*zeta/scale)."""
    return series_from_complex([0] + [sign ** k * math.factorial(k) / scale ** k for k in range(n)])


def euler_integral(x):
    return quad(lambda t: math.exp(-t / x) / (1 + t), 0, np.inf, epsabs=0, epsrel=1e-13)[0]


def test_borel_literals():
    b = borel_transform(euler())
    assert np.allclose(b.complex_coeffs(), 1)
    assert np.allclose(borel_transform(series_from_complex([0, 1])).complex_coeffs()[:1], [1])
    c = borel_transform(series_from_complex([0, 0, 1])).complex_coeffs()
    assert np.allclose(c[:2], [0, 1])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=3, max_size=8),
       st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False))
def test_borel_linear(cs, k):
    f = series_from_complex(cs)
    g = series_from_complex(cs[::-1])
    lhs = borel_transform(f + g.scale(k)).complex_coeffs()
    rhs = borel_transform(f).complex_coeffs() + k * borel_transform(g).complex_coeffs()
    assert np.allclose(lhs, rhs, rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("x", [0.05, 0.1, 0.2])
def test_euler_sum_matches_integral(x):
    b = borel_transform(euler(sign=-1))
    r = laplace_sum_detailed(b, math.pi / 2, x)
    assert abs(r.value / euler_integral(x) - 1) <= 1e-6
    assert r.error_estimate < 1e-10


def test_pole_on_ray():
    with pytest.raises(PoleOnRay):
        laplace_sum(borel_transform(euler()), 0.0, 0.1)


@pytest.mark.parametrize("x", [0.05, 0.1, 0.2])
def test_lateral_jump_residue(x):
    jump = lateral_jump(borel_transform(euler()), 0.0, x=x)
    expected = 2j * math.pi * math.exp(-1 / x)
    assert abs(jump - expected) <= 1e-5 * abs(expected)


def test_scaled_jump():
    # B = 1/(1 - zeta/2) has residue -2 at zeta = 2
    jump = lateral_jump(borel_transform(euler(scale=2.0)), 0.0, x=0.1)
    expected = 2j * math.pi * 2 * math.exp(-2 / 0.1)
    assert abs(jump - expected) <= 1e-5 * abs(expected)


def test_singular_directions():
    assert singular_directions(borel_transform(euler())) == pytest.approx([0.0], abs=1e-9)
    d = singular_directions(borel_transform(euler(sign=-1)))
    assert abs(abs(d[0]) - math.pi) < 1e-9


def test_direction_independence_in_regular_arc():
    b = borel_transform(euler(sign=-1))
    for x in (0.1, 0.1 * cmath.exp(0.4j)):
        a = laplace_sum(b, math.pi / 3, x)
        c = laplace_sum(b, -math.pi / 4, x)
        assert abs(a - c) <= 1e-12 * abs(a)


@pytest.mark.parametrize("x", [0.05, 0.1, 0.2])
def test_product_compatibility(x):
    u = euler(sign=-1)
    uu = series_from_complex(np.convolve(u.complex_coeffs(), u.complex_coeffs())[: N + 1])
    s = laplace_sum(borel_transform(u), math.pi / 2, x)
    s2 = laplace_sum(borel_transform(uu), math.pi / 2, x)
    assert abs(s2 / s ** 2 - 1) <= 1e-5


def test_polynomials_sum_to_themselves():
    f = series_from_complex([0, 1, 2, 0, 0, 0, 0, 0])
    assert abs(laplace_sum(borel_transform(f), 0.3, 0.1) - 0.12) < 1e-15


def test_convergent_series_is_not_given_fake_poles():
    # geometric series: entire Borel transform, the sum is the Taylor sum
    f = series_from_complex([0] + [0.5 ** k for k in range(12)])
    b = borel_transform(f)
    assert singular_directions(b) == []
    x = 0.3
    assert abs(laplace_sum(b, -math.pi / 2, x) - sum(0.5 ** k * x ** (k + 1) for k in range(12))) < 1e-15


def test_directional_sum_samples():
    d = directional_sum(borel_transform(euler(sign=-1)), math.pi / 2, [0.1, 0.2])
    assert [s[0] for s in d.samples] == [0.1, 0.2]
    assert abs(d.samples[0][1] - euler_integral(0.1)) < 1e-12


def test_robust_pade_recovers_rational():
    c = np.array([1.0 / 2 ** k for k in range(10)], dtype=complex)
    p, q = robust_pade(c, 3, 3)
    assert len(q) == 2 and len(p) == 1
    assert abs(q[1] / q[0] + 0.5) < 1e-12


def test_gevrey_certificates():
    g = gevrey_fit([math.factorial(k) for k in range(20)])
    assert g.is_gevrey1 and abs(g.C - 1) < 1e-6
    g = gevrey_fit([2.0 ** k * math.factorial(k) for k in range(20)])
    assert abs(g.C - 2) < 1e-6
    g = gevrey_fit([float(math.factorial(k)) ** 2 for k in range(20)])
    assert not g.is_gevrey1
    small = gevrey_fit([float(math.factorial(k)) ** 2 for k in range(10)])
    assert g.fit_residual > small.fit_residual


def test_bound_holds_for_every_coefficient():
    cs = [(1 + (k % 3)) * 3.0 ** k * math.factorial(k) for k in range(15)]
    g = gevrey_fit(cs)
    for k, c in enumerate(cs):
        assert abs(c) <= g.A * g.C ** k * math.factorial(k) * (1 + 1e-12)


def test_rejects_bad_input():
    b = borel_transform(euler(sign=-1))
    with pytest.raises(RejectedInput):
        laplace_sum(b, 0.0, 0)
    with pytest.raises(RejectedInput):
        gevrey_fit([1, 2, 3])
    with pytest.raises(RejectedInput):
        # from theta = pi/2 the pole at zeta = 1 blocks every ray reaching arg x = -pi/2
        laplace_sum(borel_transform(euler()), math.pi / 2, -0.1j)
