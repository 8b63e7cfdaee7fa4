import cmath
import math

import numpy as np
import pytest
from scipy.integrate import quad

from saddlenode.errors import (AnnulusEmpty, InsufficientRange, MonomialCutoffTooSmall,
                               NewtonDivergence)
from saddlenode.leafspace import LeafChart, f_eval, sector_for
from saddlenode.normalizer import NormalForm
from saddlenode.pscore import MultiSeries
from saddlenode.stokes import (CircleSpec, PolyMap, SectorialNormalization,
                               compute_stokes_data, default_points, extract_laurent,
                               first_index, flatness_check, growth_constant,
                               identity_isotropy, isotropy_residual, moduli_report,
                               sectorial_normalization, stokes_diffeo, stokes_pipeline,
                               synthetic_isotropy)
from saddlenode.vfield import DiagSaddleNode, push_forward

from helpers import rand_phi, seeded

NF = NormalForm.div_integrable(1, "1/2", "1/2", ["1/5", "-1/7"], trunc=5)
SIDES = ("lambda", "-lambda")


def chart_for(side, nf=NF):
    return LeafChart(nf, sector_for(1, side, radius=3, epsilon=0.3))


def random_tables(side, seed, n_max=6, w_order=4, size=0.3):
    rng = np.random.default_rng(seed)
    return {(j, n): size * (rng.normal(size=w_order + 1) + 1j * rng.normal(size=w_order + 1))
            for j in (1, 2) for n in range(first_index(j, side), n_max + 1)}


@pytest.fixture(scope="module")
def euler_run():
    N = 12
    Y = DiagSaddleNode(1, MultiSeries({(2, 0, 0): 1}, N), MultiSeries({(1, 0, 1): 1}, N))
    return stokes_pipeline(Y, N)


def test_polymap_inverse():
    P = PolyMap({(1, 0): 1, (0, 2): 0.3, (1, 1): -0.2}, {(0, 1): 1, (2, 0): 0.1j})
    rng = np.random.default_rng(0)
    y1 = 0.3 * (rng.normal(size=20) + 1j * rng.normal(size=20))
    y2 = 0.3 * (rng.normal(size=20) + 1j * rng.normal(size=20))
    z = P(y1, y2)
    u1, u2 = P.inverse(*z)
    assert np.max(np.abs(u1 - y1)) < 1e-12 and np.max(np.abs(u2 - y2)) < 1e-12


def test_polymap_inverse_with_offset():
    P = PolyMap({(0, 0): 2.0, (1, 0): 1, (2, 0): 0.5}, {(0, 1): 1})
    y = P.inverse(np.array([2.3]), np.array([0.1]))
    assert abs(P(*y)[0][0] - 2.3) < 1e-12
    with pytest.raises(NewtonDivergence):
        PolyMap({(1, 0): 1, (3, 0): 1}, {(0, 1): 1}).inverse(np.array([1e200]), np.array([0.0]),
                                                            max_halvings=2)


@pytest.mark.parametrize("side", SIDES)
def test_identity_isotropy_forced_values(side):
    chart = chart_for(side)
    d = compute_stokes_data(identity_isotropy(side), chart, default_points(1)[side])
    one = "Psi_1,1" if side == "lambda" else "Psi_2,1"
    lin = "Psi_2,-1(0)" if side == "lambda" else "Psi_1,-1(0)"
    assert abs(d.forced[one] - 1) < 1e-9
    assert abs(d.forced[lin]) < 1e-9
    assert max(np.max(np.abs(v)) for v in d.tables.values()) < 1e-9
    assert d.below_range < 1e-9


@pytest.mark.parametrize("side", SIDES)
def test_synthetic_tables_round_trip(side):
    chart = chart_for(side)
    tabs = random_tables(side, seed=hash(side) % 1000)
    iso = synthetic_isotropy(chart, tabs, side)
    d = compute_stokes_data(iso, chart, default_points(1)[side])
    err = max(np.max(np.abs(d.tables[k] - tabs[k])) for k in tabs)
    assert err <= 1e-8
    assert d.below_range <= 1e-9
    # the reported error estimate is an honest bound here
    assert max(np.max(v) for v in d.errors.values()) >= err * 0.1


def test_extract_single_coefficient():
    side = "lambda"
    chart = chart_for(side)
    tabs = random_tables(side, seed=5)
    iso = synthetic_isotropy(chart, tabs, side)
    w = 0.2 + 0.1j
    x = default_points(1)[side]
    val, err = extract_laurent(iso, chart, 2, 3, w, x)
    assert abs(val - np.polyval(tabs[(2, 3)][::-1], w)) < 1e-9
    neg, _ = extract_laurent(iso, chart, 1, -1, w, x)
    assert abs(neg) < 1e-9


def test_synthetic_isotropy_preserves_normal_form():
    side = "lambda"
    chart = chart_for(side)
    iso = synthetic_isotropy(chart, random_tables(side, seed=9, size=0.05), side)
    rng = np.random.default_rng(2)
    y1 = 0.05 * (rng.normal(size=5) + 1j * rng.normal(size=5))
    y2 = 0.05 * (rng.normal(size=5) + 1j * rng.normal(size=5))
    assert isotropy_residual(iso, NF, 0.6 * cmath.exp(0.1j), y1, y2) <= 1e-6


def test_injected_flat_perturbation_is_recovered():
    x = 0.4 * cmath.exp(0.05j)
    delta = 0.03 * math.exp(-1 / abs(x))
    plus = SectorialNormalization("plus", 1, math.pi / 2, {}, samples={x: PolyMap.identity()})
    minus = SectorialNormalization("minus", 1, -math.pi / 2, {},
                                   samples={x: PolyMap({(1, 0): 1, (0, 0): delta, (0, 2): 0.1},
                                                       {(0, 1): 1})})
    psi = stokes_diffeo(plus, minus, "lambda", [x])
    y1 = np.array([0.1, 0.2j])
    y2 = np.array([0.05, -0.1])
    z1, z2 = psi(x, y1, y2)
    assert np.max(np.abs(z1 - (y1 - delta - 0.1 * y2 ** 2))) < 1e-12
    assert np.max(np.abs(z2 - y2)) < 1e-14
    ident = stokes_diffeo(plus, plus, "lambda", [x])
    assert np.max(np.abs(ident(x, y1, y2)[0] - y1)) < 1e-14


def test_flatness_fits():
    radii = np.linspace(0.05, 0.5, 10)
    assert not flatness_check(lambda x, a, b: (a + x * x, b), [0, 0.1], radii).ok
    fit = flatness_check(lambda x, a, b: (a + np.exp(-1 / abs(x)), b), [0, 0.1], radii)
    assert fit.ok and abs(fit.B - 1) < 0.05
    fit = flatness_check(lambda x, a, b: (a, b), [0, 0.1], radii)
    assert fit.flat_to_machine


@pytest.mark.parametrize("side", SIDES)
def test_synthetic_isotropy_is_flat(side):
    chart = chart_for(side)
    iso = synthetic_isotropy(chart, random_tables(side, seed=3), side)
    th = chart.sector.theta
    assert flatness_check(iso, [th - 0.1, th + 0.1], np.linspace(0.08, 0.5, 12)).B > 0


def test_growth_constant_finite():
    side = "lambda"
    chart = chart_for(side)
    tabs = random_tables(side, seed=1)
    d = compute_stokes_data(synthetic_isotropy(chart, tabs, side), chart, default_points(1)[side])
    C = growth_constant(d, chart, [0.5, 0.7 * cmath.exp(0.1j)])
    assert 0 < C < math.inf
    # the bound is one-sided: doubling C always works
    assert growth_constant(d, chart, [0.6]) <= 2 * max(C, growth_constant(d, chart, [0.6]))


def test_euler_embedding(euler_run):
    run = euler_run
    rep = run.report
    assert abs(rep.psi1_mlam_0_0 - (-2j * math.pi)) < 1e-8
    assert abs(rep.psi2_lam_0_0) < 1e-8
    assert rep.H2_convergent and not rep.H1_convergent and not rep.center_variety_convergent
    assert rep.symplectic
    # Phi_plus against direct quadrature of the Borel integral
    x = 0.3 + 0.2j
    u = run.plus.at(x).c1[(0, 0)]
    e = cmath.exp(0.5j * math.pi)

    def g(t):
        z = t * e
        return -z / (1 + z) * cmath.exp(-z / x) * e

    def part(f):
        return quad(lambda t: f(g(t)), 0, np.inf, epsabs=1e-15, epsrel=1e-13, limit=200)[0]
    exact = part(lambda z: z.real) + 1j * part(lambda z: z.imag)
    assert abs(u - exact) <= 1e-10 * abs(exact)


def test_normal_form_input_has_trivial_moduli():
    Y = NF.field(7)
    run = stokes_pipeline(Y, 7)
    rep = run.report
    assert rep.center_variety_convergent and rep.H1_convergent and rep.H2_convergent
    assert abs(rep.martinet_ramis_affine_part) < 1e-8
    assert rep.symplectic


def test_convergent_conjugation_has_trivial_moduli():
    N = 8
    Y = push_forward(rand_phi(seeded(4), N, density=0.1), NF.field(N + 1))
    rep = stokes_pipeline(Y, N).report
    assert rep.center_variety_convergent and rep.H1_convergent and rep.H2_convergent


def test_moduli_report_on_synthetic_tables():
    data = {}
    for side in SIDES:
        chart = chart_for(side)
        tabs = random_tables(side, seed=11, size=0.0)
        tabs[(2, 0) if side == "lambda" else (1, 0)] = np.array([0.2, 0, 0, 0, 0], dtype=complex)
        data[side] = compute_stokes_data(synthetic_isotropy(chart, tabs, side), chart,
                                         default_points(1)[side])
    rep = moduli_report(data["lambda"], data["-lambda"])
    assert not rep.center_variety_convergent
    assert abs(rep.psi2_lam_0_0 - 0.2) < 1e-8 and abs(rep.psi1_mlam_0_0 - 0.2) < 1e-8
    assert rep.symplectic


def test_errors():
    side = "lambda"
    chart = chart_for(side)
    x = default_points(1)[side]
    with pytest.raises(InsufficientRange):
        compute_stokes_data(identity_isotropy(side), chart, x, n_max=1)
    with pytest.raises(AnnulusEmpty):
        extract_laurent(identity_isotropy(side), chart, 1, 2, 10.0, x, CircleSpec(0.5, 0.5))
    N = 8
    Y = DiagSaddleNode(1, MultiSeries({(2, 0, 0): 1, (0, 2, 1): 5}, N), MultiSeries({(1, 0, 1): 1}, N))
    from saddlenode.normalizer import normalize
    phi, _ = normalize(Y, N)
    with pytest.raises(MonomialCutoffTooSmall):
        sectorial_normalization(Y, phi, "plus", grid=[0.5j], y_radius=1.0, tail_tol=1e-12)
