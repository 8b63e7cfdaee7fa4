"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line (see ``helpers.verdict``); the lines are
repeated in the terminal summary.  Run with ``pytest tests/test_acceptance.py -v``.
"""

import json
import math
import time
from fractions import Fraction
from importlib import resources

import numpy as np
import pytest

from saddlenode.leafspace import (LeafChart, SectorSpec, f_eval, first_integrals,
                                  integrate_normal_form, sector_for)
from saddlenode.normalizer import (NormalForm, normalize, normalize_symplectic,
                                   symplectic_defect, verify_normalization)
from saddlenode.pscore import MultiSeries, ms_substitute, to_exact
from saddlenode.stokes import (compute_stokes_data, default_points, first_index,
                               flatness_check, stokes_pipeline, synthetic_isotropy)
from saddlenode.summation import borel_transform, laplace_sum, lateral_jump, series_from_complex
from saddlenode.vfield import DiagSaddleNode, FiberedDiffeo, push_forward, residue

from helpers import rand_nf, rand_phi, rand_shear_phi, seeded, verdict

# e^{1/x} E1(1/x), computed with mpmath at 30 digits and frozen here
EULER_INTEGRAL = {
    0.05: 0.047718545495960841699,
    0.1: 0.091563333939788081876,
    0.2: 0.17042217628473220181,
}


def test_criterion_1_normalization_exactness():
    rng = seeded(2024)
    N = 8
    start = time.perf_counter()
    worst, mismatches = 0, 0
    for _ in range(20):
        nf = rand_nf(rng, N)
        Y = push_forward(rand_phi(rng, N), nf.field(N))
        phi, out = normalize(Y, N)
        worst = max(worst, verify_normalization(Y, phi, out, N))
        mismatches += out != nf
    elapsed = time.perf_counter() - start
    ok = worst == 0 and mismatches == 0 and elapsed <= 30
    verdict(1, ok, f"(20 inputs, residual {worst}, nf mismatches {mismatches}, {elapsed:.1f}s)")
    assert ok


def test_criterion_2_uniqueness():
    rng = seeded(7)
    N = 8
    nonidentity = 0
    for kind in ({}, {"div": True}, {"hamiltonian": True}):
        nf = rand_nf(rng, N, **kind)
        phi, out = normalize(nf.field(N), N)
        nonidentity += not phi.is_identity() or out != nf
    verdict(2, nonidentity == 0, f"({nonidentity} non-identity maps out of 3)")
    assert nonidentity == 0


def test_criterion_3_residue_invariance():
    rng = seeded(11)
    N = 5
    broken = 0
    for _ in range(50):
        Y = rand_nf(rng, N).field(N)
        broken += residue(push_forward(rand_phi(rng, N), Y)) != residue(Y)
    verdict(3, broken == 0, f"({broken} of 50 conjugations changed the residue)")
    assert broken == 0


def test_criterion_4_symplectic():
    rng = seeded(13)
    N = 6
    bad = []
    for _ in range(3):
        nf = rand_nf(rng, N, hamiltonian=True)
        phi0 = rand_shear_phi(rng, N + 1)
        Y = push_forward(phi0, nf.field(N + 1))
        phi, out = normalize_symplectic(Y, N)
        if out.a != to_exact(1) or out != nf:
            bad.append("residue")
        if symplectic_defect(phi, N - 1) != 0:
            bad.append("determinant")
    verdict(4, not bad, f"(3 inputs, failures: {bad or 'none'})")
    assert not bad


def test_criterion_5_summation_oracle():
    start = time.perf_counter()
    alternating = borel_transform(series_from_complex(
        [0] + [(-1) ** k * math.factorial(k) for k in range(30)]))
    plain = borel_transform(series_from_complex([0] + [math.factorial(k) for k in range(30)]))
    sum_err = max(abs(laplace_sum(alternating, math.pi / 2, x) / v - 1)
                  for x, v in EULER_INTEGRAL.items())
    jump_err = 0.0
    for x in EULER_INTEGRAL:
        jump = lateral_jump(plain, 0.0, x=x)
        jump_err = max(jump_err, abs(abs(jump) / (2 * math.pi * math.exp(-1 / x)) - 1))
    elapsed = time.perf_counter() - start
    ok = sum_err <= 1e-6 and jump_err <= 1e-5 and elapsed <= 10
    verdict(5, ok, f"(sum rel {sum_err:.2e}, jump rel {jump_err:.2e}, {elapsed:.2f}s)")
    assert ok


def test_criterion_6_leaf_identities():
    nf = NormalForm.div_integrable(1, "1/3", "2/3", ["1/5", "-1/7", "1/11"], trunc=9)
    chart = LeafChart(nf, sector_for(1, "lambda", radius=1, epsilon=0.3))
    rng = np.random.default_rng(6)
    n = 10_000
    x = rng.uniform(0.1, 0.9, n) * np.exp(1j * rng.uniform(-0.29, 0.29, n))
    y1 = 0.3 * (rng.normal(size=n) + 1j * rng.normal(size=n))
    y2 = 0.3 * (rng.normal(size=n) + 1j * rng.normal(size=n))
    h1, h2, w = first_integrals(chart, x, y1, y2)
    prod = np.max(np.abs(h1 * h2 - w) / np.abs(w))
    xa = chart.power(x, chart.a)
    fprod = np.max(np.abs(f_eval(chart, 1, x, w) * f_eval(chart, 2, x, w) - xa) / np.abs(xa))

    wide = LeafChart(nf, SectorSpec(0.0, 1.5, 2.0))
    drift = 0.0
    for x0, a, b in [(0.3 + 0.05j, 0.2, 0.1 + 0.1j), (0.25 - 0.1j, -0.1j, 0.3),
                     (0.2, 0.15 + 0.05j, -0.2)]:
        _, xs, ys1, ys2 = integrate_normal_form(nf, x0, a, b, 1.0)
        H1, H2, _ = first_integrals(wide, xs, ys1, ys2)
        drift = max(drift, np.max(np.abs(H1 - H1[0])), np.max(np.abs(H2 - H2[0])))
    ok = prod <= 1e-12 and fprod <= 1e-12 and drift <= 1e-8
    verdict(6, ok, f"(h1h2-w {prod:.1e}, f1f2-x^a {fprod:.1e}, drift {drift:.1e})")
    assert ok


def test_criterion_7_synthetic_moduli():
    nf = NormalForm.div_integrable(1, "1/2", "1/2", ["1/5", "-1/7"], trunc=5)
    err, forced, B = 0.0, 0.0, []
    for seed, side in enumerate(("lambda", "-lambda")):
        chart = LeafChart(nf, sector_for(1, side, radius=3, epsilon=0.3))
        rng = np.random.default_rng(70 + seed)
        tabs = {(j, n): 0.3 * (rng.normal(size=5) + 1j * rng.normal(size=5))
                for j in (1, 2) for n in range(first_index(j, side), 7)}
        iso = synthetic_isotropy(chart, tabs, side)
        d = compute_stokes_data(iso, chart, default_points(1)[side], n_max=6, w_order=4)
        err = max(err, max(np.max(np.abs(d.tables[k] - tabs[k])) for k in tabs))
        one, lin = (("Psi_1,1", "Psi_2,-1(0)") if side == "lambda"
                    else ("Psi_2,1", "Psi_1,-1(0)"))
        forced = max(forced, abs(d.forced[one] - 1), abs(d.forced[lin]))
        th = chart.sector.theta
        B.append(flatness_check(iso, [th - 0.1, th + 0.1], np.linspace(0.08, 0.5, 12)).B)
    ok = err <= 1e-8 and forced <= 1e-9 and min(B) > 0
    verdict(7, ok, f"(table err {err:.1e}, forced {forced:.1e}, B {min(B):.3g})")
    assert ok


def _shear_pair(rng, N):
    """(y1 + g(x, y2), y2) followed by (y1, y2 + h(x, y1)), small rational coefficients."""
    def coef():
        return Fraction(int(rng.integers(-4, 5)), 8)
    g = MultiSeries({e: coef() for e in [(1, 0, 1), (0, 0, 2), (1, 0, 2), (0, 0, 3), (2, 0, 1)]}, N)
    h = MultiSeries({e: coef() for e in [(1, 1, 0), (0, 2, 0), (0, 3, 0), (2, 1, 0)]}, N)
    x, y1, y2 = (MultiSeries.var(v, N) for v in ("x", "y1", "y2"))
    p1 = y1 + g
    return FiberedDiffeo(p1, y2 + ms_substitute(h, x, p1, y2))


def test_criterion_8_faithfulness():
    N = 12
    Y = DiagSaddleNode(1, MultiSeries({(2, 0, 0): 1}, N), MultiSeries({(1, 0, 1): 1}, N))
    base = stokes_pipeline(Y, N)
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(5):
        run = stokes_pipeline(push_forward(_shear_pair(rng, N), Y), N)
        for side, data in run.data.items():
            for key, table in data.tables.items():
                worst = max(worst, np.max(np.abs(table - base.data[side].tables[key])))
    ok = worst <= 1e-6
    verdict(8, ok, f"(5 conjugations, max coefficient difference {worst:.1e})")
    assert ok


@pytest.mark.xfail(reason="the polynomial chart behind the reference value is not bundled",
                   strict=False)
def test_criterion_9_painleve():
    meta = json.loads(resources.files("saddlenode").joinpath("data/painleve1.json").read_text())
    target = meta["reference_value"]["value"]
    assert abs(target - 2 ** 0.375 * 3 ** 0.125 / math.sqrt(math.pi)) < 1e-15
    ok = meta["status"] != "chart not bundled"
    verdict(9, ok, "(expected failure: " + meta["status"] + ")")
    assert ok, meta["status"]
