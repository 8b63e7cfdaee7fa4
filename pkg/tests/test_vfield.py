from fractions import Fraction

import pytest
import sympy as sp

from saddlenode.errors import ParseError, RejectedInput
from saddlenode.normalizer import NormalForm
from saddlenode.pscore import EXACT, FLOAT, MultiSeries, to_complex, to_exact
from saddlenode.vfield import (DiagSaddleNode, FiberedDiffeo, classify, format_field,
                               is_transversally_hamiltonian, nondegeneracy, parse_field,
                               push_forward, residue, restrict_x0)

from helpers import rand_nf, rand_phi, seeded


def test_restrict_literal():
    Y = DiagSaddleNode(2, MultiSeries({(0, 0, 2): 1, (1, 1, 1): 3}, 4), MultiSeries.zero(4))
    r1, r2 = restrict_x0(Y)
    assert r1 == MultiSeries({(0, 1, 0): -2, (0, 0, 2): 1}, 4)
    assert r2 == MultiSeries({(0, 0, 1): 2}, 4)


def test_restrict_matches_coefficient_filter():
    rng = seeded(3)
    nf = rand_nf(rng, 6)
    Y = push_forward(rand_phi(rng, 6), nf.field(6))
    for comp, r in zip(Y.components(), restrict_x0(Y)):
        for e, c in comp.items():
            assert to_complex(r.coeff(e)) == (to_complex(c) if e[0] == 0 else 0)


def test_push_forward_identity_and_round_trip():
    rng = seeded(5)
    N = 6
    Y = push_forward(rand_phi(rng, N), rand_nf(rng, N).field(N))
    assert push_forward(FiberedDiffeo.identity(N), Y) == Y
    phi = rand_phi(rng, N)
    assert push_forward(phi.inverse(), push_forward(phi, Y)) == Y


def test_residue_invariant_under_conjugation():
    rng = seeded(9)
    N = 5
    Y = rand_nf(rng, N).field(N)
    for _ in range(10):
        assert residue(push_forward(rand_phi(rng, N), Y)) == residue(Y)


def _lie_coefficient(Y):
    """Coefficient of dy1^dy2 in L_Y(dy1^dy2 / x) mod dx, computed symbolically."""
    x, y1, y2 = sp.symbols("x y1 y2")

    def poly(s):
        return sum(sp.Rational(c.x.numerator, c.x.denominator) * x**e[0] * y1**e[1] * y2**e[2]
                   for e, c in s.items())

    lam = sp.Rational(Y.lam.x.numerator, Y.lam.x.denominator)
    Y0 = x**2
    Y1 = -lam * y1 + poly(Y.F1)
    Y2 = lam * y2 + poly(Y.F2)
    g = 1 / x
    # L_Y(g dy1^dy2) = Y(g) dy1^dy2 + g dY1^dy2 + g dy1^dY2, and dx terms drop out
    expr = Y0 * sp.diff(g, x) + g * (sp.diff(Y1, y1) + sp.diff(Y2, y2))
    return sp.simplify(expr)


def test_hamiltonian_condition_matches_symbolic_lie_derivative():
    rng = seeded(21)
    for hamiltonian in (True, False, True, False):
        nf = rand_nf(rng, 5, hamiltonian=hamiltonian, imag=False)
        Y = push_forward(rand_phi(rng, 5, density=0.15), nf.field(5)) if not hamiltonian \
            else nf.field(5)
        sym = _lie_coefficient(Y)
        assert is_transversally_hamiltonian(Y) == (sym == 0)


def test_normal_form_family_hamiltonian_iff_a_is_one():
    nf = NormalForm.make(1, Fraction(1, 4), Fraction(3, 4), [Fraction(2), Fraction(-1, 3)], trunc=2)
    assert is_transversally_hamiltonian(nf.field(6))
    nf = NormalForm.make(1, Fraction(1, 4), Fraction(1, 4), [Fraction(2)], trunc=1)
    assert not is_transversally_hamiltonian(nf.field(6))
    # c1 + c2 != 0 also breaks it
    nf = NormalForm.make(1, Fraction(1, 4), Fraction(3, 4), [1], [1], trunc=1)
    assert not is_transversally_hamiltonian(nf.field(6))


def test_classify_normal_form_family():
    rng = seeded(13)
    for _ in range(4):
        nf = rand_nf(rng, 7)
        rep = classify(nf.field(7), 7)
        assert rep.residue == nf.a
        assert rep.strictly_nondegenerate == (to_complex(nf.a).real > 0)
        assert rep.nondegenerate is True


def test_classify_obstruction_witness():
    # c1 + c2 = 0 at v, but not at v^2
    nf = NormalForm.make(1, Fraction(1, 2), Fraction(1, 3), [1, 2], [-1, 5], trunc=2)
    Y = push_forward(rand_phi(seeded(2), 7), nf.field(7))
    rep = classify(Y, 7)
    assert rep.div_obstruction[0] == (0, 2, 2)
    assert rep.div_obstruction[1] == to_exact(7)
    assert rep.div_integrable_to_order == 4


def test_nondegeneracy_tristate():
    assert nondegeneracy(to_exact(Fraction(-1, 2)), EXACT)[0] is False
    assert nondegeneracy(to_exact((Fraction(-1, 2), Fraction(1))), EXACT)[0] is True
    assert nondegeneracy(complex(-0.5), FLOAT)[0] is None
    assert nondegeneracy(complex(0.5), FLOAT)[0] is True
    assert nondegeneracy(complex(-0.5004), FLOAT)[0] is True


def test_field_document_round_trip():
    rng = seeded(4)
    Y = push_forward(rand_phi(rng, 5), rand_nf(rng, 5).field(5))
    assert parse_field(format_field(Y)) == Y


@pytest.mark.parametrize("doc,line", [
    ("trunc_order 3\nF1\n0 2 0 1 0\n", None),
    ("lambda 1\ntrunc_order 3\nF1\n0 2 0 1\n", 4),
    ("lambda 1\ntrunc_order 3\n0 2 0 1 0\n", 3),
    ("lambda 1\ntrunc_order 3\nF1\nF1\n", 4),
])
def test_field_parse_errors(doc, line):
    with pytest.raises(ParseError) as info:
        parse_field(doc)
    assert info.value.line == line


def test_rejects_linear_terms_and_zero_lambda():
    with pytest.raises(RejectedInput):
        DiagSaddleNode(1, MultiSeries({(0, 1, 0): 1}, 3), MultiSeries.zero(3))
    with pytest.raises(RejectedInput):
        DiagSaddleNode(0, MultiSeries.zero(3), MultiSeries.zero(3))
    with pytest.raises(RejectedInput):
        FiberedDiffeo(MultiSeries.var("y2", 3), MultiSeries.var("y1", 3))
