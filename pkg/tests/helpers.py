"""Random inputs shared by the test modules."""

import random
from fractions import Fraction

from saddlenode.normalizer import NormalForm
from saddlenode.pscore import EXACT, MultiSeries, ms_substitute
from saddlenode.vfield import FiberedDiffeo


def rand_q(rng, num=4, den=4):
    return Fraction(rng.randint(-num, num), rng.randint(1, den))


def rand_qi(rng, num=4, den=4, imag=True):
    return (rand_q(rng, num, den), rand_q(rng, num, den) if imag else Fraction(0))


def rand_nf(rng, N, div=False, hamiltonian=False, imag=True):
    """Random strictly non-degenerate normal form (Re(a1 + a2) > 0)."""
    lam = (Fraction(rng.randint(1, 3), rng.randint(1, 2)),
           rand_q(rng, 2, 2) if imag else Fraction(0))
    a1 = rand_qi(rng, imag=imag)
    if hamiltonian:
        a2 = (1 - a1[0], -a1[1])
    else:
        a2 = (Fraction(rng.randint(1, 6), rng.randint(1, 3)) - a1[0],
              rand_q(rng) if imag else Fraction(0))
    k = (N - 1) // 2
    c1 = [rand_qi(rng, imag=imag) for _ in range(k)]
    if div or hamiltonian:
        return NormalForm.make(lam, a1, a2, c1, mode=EXACT, trunc=k)
    c2 = [rand_qi(rng, imag=imag) for _ in range(k)]
    return NormalForm.make(lam, a1, a2, c1, c2, mode=EXACT, trunc=k)


def _monomials(N, min_deg=2):
    return [(k0, k1, k2) for d in range(min_deg, N + 1)
            for k0 in range(d + 1) for k1 in range(d + 1 - k0)
            for k2 in [d - k0 - k1] if k1 + k2 >= 1]


def rand_phi(rng, N, density=0.3, mode=EXACT):
    """Random fibered map tangent to the identity (every term has a y factor)."""
    mons = _monomials(N)
    comps = []
    for var in ("y1", "y2"):
        terms = {e: rand_qi(rng, 3, 3) for e in mons if rng.random() < density}
        terms = {e: c for e, c in terms.items() if c != (0, 0)}
        comps.append(MultiSeries.var(var, N, mode) + MultiSeries(terms, N, mode))
    return FiberedDiffeo(*comps)


def rand_shear_phi(rng, N, density=0.4, mode=EXACT):
    """Composition of the shears (y1 + g(x, y2), y2) and (y1, y2 + h(x, y1)).

    Each shear has Jacobian determinant 1, so the composition is symplectic.
    """
    def part(var_index):
        terms = {}
        for e in _monomials(N):
            if e[3 - var_index] != 0:
                continue
            if rng.random() < density:
                terms[e] = rand_qi(rng, 3, 3)
        return MultiSeries({e: c for e, c in terms.items() if c != (0, 0)}, N, mode)

    g = part(2)  # depends on x, y2
    h = part(1)  # depends on x, y1
    x = MultiSeries.var("x", N, mode)
    y1 = MultiSeries.var("y1", N, mode)
    y2 = MultiSeries.var("y2", N, mode)
    p1 = y1 + g
    p2 = y2 + ms_substitute(h, x, p1, y2, N)
    return FiberedDiffeo(p1, p2)


def seeded(seed):
    return random.Random(seed)


# criterion number -> (ok, detail), filled by test_acceptance and printed by conftest
ACCEPTANCE = {}


def verdict(number, ok, detail=""):
    ACCEPTANCE[number] = (bool(ok), detail)
    print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    return ok
