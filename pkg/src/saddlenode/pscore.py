"""Truncated power series in (x, y1, y2) and in one variable.

Coefficients live in one of two modes:

``"exact"``
    Gaussian rationals (``sympy``'s ``QQ_I`` domain, gmpy2-backed when
    available).  Zero coefficients are never stored.
``"float"``
    Python ``complex``.  Coefficients below ``FLOAT_FLOOR`` in modulus are
    dropped.

A :class:`MultiSeries` stores every coefficient of total degree at most
``trunc`` and is immutable once built.  Exponent triples are ordered
``(k0, k1, k2)`` for ``x**k0 * y1**k1 * y2**k2``.
"""

from __future__ import annotations

import re
from collections import defaultdict
from fractions import Fraction
from typing import Iterable, Mapping

from sympy.polys.domains import QQ_I
from sympy.polys.domains.gaussiandomains import GaussianRational

from .errors import ModeMismatch, ParseError, RejectedInput

EXACT = "exact"
FLOAT = "float"
MODES = (EXACT, FLOAT)
FLOAT_FLOOR = 1e-30

VARS = {"x": 0, "y1": 1, "y2": 2, 0: 0, 1: 1, 2: 2}

# exponent packing used inside products; components stay below 2**8
_SHIFT = 8
_MASK = (1 << _SHIFT) - 1
_MAX_TRUNC = _MASK


def _pack(e):
    return (e[0] << (2 * _SHIFT)) | (e[1] << _SHIFT) | e[2]


def _unpack(p):
    return (p >> (2 * _SHIFT), (p >> _SHIFT) & _MASK, p & _MASK)


# ---------------------------------------------------------------------------
# scalars


def _rational(v):
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise RejectedInput(f"not a rational literal: {v!r}") from exc
    if isinstance(v, float):
        return Fraction(v)
    return v


def to_exact(value):
    """Convert ``value`` to an exact Gaussian rational.

    Floats are converted through their exact binary value.
    """
    if isinstance(value, GaussianRational):
        return value
    if isinstance(value, complex):
        return QQ_I(Fraction(value.real), Fraction(value.imag))
    if isinstance(value, tuple) and len(value) == 2:
        return QQ_I(_rational(value[0]), _rational(value[1]))
    return QQ_I(_rational(value), 0)


def to_complex(value) -> complex:
    if isinstance(value, GaussianRational):
        return complex(float(value.x), float(value.y))
    if isinstance(value, tuple) and len(value) == 2:
        return complex(float(Fraction(value[0])), float(Fraction(value[1])))
    if isinstance(value, str):
        return complex(float(Fraction(value)))
    return complex(value)


def coerce(value, mode):
    if mode == EXACT:
        return to_exact(value)
    if mode == FLOAT:
        return to_complex(value)
    raise RejectedInput(f"unknown coefficient mode {mode!r}")


def is_zero(c, mode) -> bool:
    if mode == EXACT:
        return not c
    return abs(c) < FLOAT_FLOOR


def zero_of(mode):
    return QQ_I.zero if mode == EXACT else 0j


def one_of(mode):
    return QQ_I.one if mode == EXACT else 1 + 0j


def coeff_abs(c) -> float:
    return abs(to_complex(c))


def format_coeff(c, mode) -> tuple[str, str]:
    if mode == EXACT:
        return str(c.x), str(c.y)
    return repr(c.real), repr(c.imag)


def exact_parts(c) -> tuple[Fraction, Fraction]:
    """Real and imaginary parts of an exact coefficient as Fractions."""
    return (Fraction(int(c.x.numerator), int(c.x.denominator)),
            Fraction(int(c.y.numerator), int(c.y.denominator)))


# ---------------------------------------------------------------------------
# multivariate series


class MultiSeries:
    """Truncated series in (x, y1, y2) with coefficients of a single mode."""

    __slots__ = ("trunc", "mode", "_terms")

    def __init__(self, terms: Mapping | None = None, trunc: int = 0,
                 mode: str = EXACT):
        if mode not in MODES:
            raise RejectedInput(f"unknown coefficient mode {mode!r}")
        if trunc < 0 or trunc > _MAX_TRUNC:
            raise RejectedInput(f"trunc_order {trunc} out of range")
        self.trunc = int(trunc)
        self.mode = mode
        clean = {}
        for e, c in (terms or {}).items():
            e = tuple(int(k) for k in e)
            if len(e) != 3 or min(e) < 0:
                raise RejectedInput(f"bad exponent {e}")
            if sum(e) > trunc:
                continue
            c = coerce(c, mode)
            if is_zero(c, mode):
                continue
            clean[e] = c
        self._terms = clean

    @classmethod
    def _raw(cls, terms, trunc, mode):
        obj = cls.__new__(cls)
        obj.trunc = trunc
        obj.mode = mode
        obj._terms = terms
        return obj

    # constructors
    @classmethod
    def zero(cls, trunc, mode=EXACT):
        return cls._raw({}, trunc, mode)

    @classmethod
    def constant(cls, value, trunc, mode=EXACT):
        return cls({(0, 0, 0): value}, trunc, mode)

    @classmethod
    def var(cls, name, trunc, mode=EXACT):
        e = [0, 0, 0]
        e[VARS[name]] = 1
        return cls({tuple(e): 1}, trunc, mode)

    @classmethod
    def monomial(cls, exps, coeff, trunc, mode=EXACT):
        return cls({tuple(exps): coeff}, trunc, mode)

    # access
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def items(self):
        return self._terms.items()

    def coeff(self, exps):
        return self._terms.get(tuple(exps), zero_of(self.mode))

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms)

    def __bool__(self):
        return bool(self._terms)

    @property
    def order(self):
        """Smallest total degree present; ``None`` for the zero series."""
        if not self._terms:
            return None
        return min(sum(e) for e in self._terms)

    def has_order_at_least(self, k: int) -> bool:
        o = self.order
        return o is None or o >= k

    def degree_part(self, d: int) -> "MultiSeries":
        return MultiSeries._raw({e: c for e, c in self._terms.items() if sum(e) == d},
                                self.trunc, self.mode)

    def truncate(self, m: int) -> "MultiSeries":
        m = min(m, self.trunc)
        return MultiSeries._raw({e: c for e, c in self._terms.items() if sum(e) <= m},
                                m, self.mode)

    def with_trunc(self, m: int) -> "MultiSeries":
        """Same coefficients with a different nominal truncation order."""
        return MultiSeries._raw({e: c for e, c in self._terms.items() if sum(e) <= m},
                                m, self.mode)

    def to_mode(self, mode: str) -> "MultiSeries":
        if mode == self.mode:
            return self
        return MultiSeries(self._terms, self.trunc, mode)

    def map_coeffs(self, fn) -> "MultiSeries":
        return MultiSeries({e: fn(c) for e, c in self._terms.items()},
                           self.trunc, self.mode)

    def max_abs(self) -> float:
        return max((coeff_abs(c) for c in self._terms.values()), default=0.0)

    # arithmetic
    def _check(self, other):
        if other.mode != self.mode:
            raise ModeMismatch(f"cannot combine {self.mode} and {other.mode} series")

    def _lift(self, other):
        if isinstance(other, MultiSeries):
            self._check(other)
            return other
        return MultiSeries.constant(other, self.trunc, self.mode)

    def __add__(self, other):
        other = self._lift(other)
        n = min(self.trunc, other.trunc)
        out = {e: c for e, c in self._terms.items() if sum(e) <= n}
        for e, c in other._terms.items():
            if sum(e) > n:
                continue
            if e in out:
                s = out[e] + c
                if is_zero(s, self.mode):
                    del out[e]
                else:
                    out[e] = s
            else:
                out[e] = c
        return MultiSeries._raw(out, n, self.mode)

    __radd__ = __add__

    def __neg__(self):
        return MultiSeries._raw({e: -c for e, c in self._terms.items()},
                                self.trunc, self.mode)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, k) -> "MultiSeries":
        k = coerce(k, self.mode)
        if is_zero(k, self.mode):
            return MultiSeries.zero(self.trunc, self.mode)
        out = {}
        for e, c in self._terms.items():
            v = c * k
            if not is_zero(v, self.mode):
                out[e] = v
        return MultiSeries._raw(out, self.trunc, self.mode)

    def __mul__(self, other):
        if isinstance(other, MultiSeries):
            return ms_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        return self.scale(other)

    def __eq__(self, other):
        if not isinstance(other, MultiSeries):
            return NotImplemented
        return (self.trunc == other.trunc and self.mode == other.mode
                and self._terms == other._terms)

    def __hash__(self):
        return hash((self.trunc, self.mode, frozenset(self._terms.items())))

    def __repr__(self):
        body = " + ".join(f"({to_complex(c):g})*x^{e[0]}y1^{e[1]}y2^{e[2]}"
                          for e, c in sorted(self._terms.items(),
                                             key=lambda t: (sum(t[0]), t[0])))
        return f"MultiSeries<{self.mode}, N={self.trunc}>[{body or '0'}]"

    def shift(self, exps, coeff=None, trunc=None) -> "MultiSeries":
        """Multiply by the monomial ``coeff * x^a y1^b y2^c``."""
        trunc = self.trunc if trunc is None else trunc
        a, b, c0 = exps
        k = one_of(self.mode) if coeff is None else coerce(coeff, self.mode)
        out = {}
        for (e0, e1, e2), c in self._terms.items():
            e = (e0 + a, e1 + b, e2 + c0)
            if sum(e) <= trunc:
                out[e] = c * k
        return MultiSeries._raw(out, trunc, self.mode)


def _grouped(series: MultiSeries, limit: int):
    groups = [[] for _ in range(limit + 1)]
    for e, c in series._terms.items():
        d = e[0] + e[1] + e[2]
        if d <= limit:
            groups[d].append((_pack(e), c))
    return groups


def ms_mul(a: MultiSeries, b: MultiSeries, trunc: int | None = None) -> MultiSeries:
    """Product of two series.

    The default truncation is the largest order at which the product is
    fully determined by the inputs (valuation aware), capped at the larger
    of the two input orders.
    """
    if a.mode != b.mode:
        raise ModeMismatch(f"cannot multiply {a.mode} by {b.mode} series")
    mode = a.mode
    if trunc is None:
        oa, ob = a.order, b.order
        if oa is None or ob is None:
            trunc = min(a.trunc, b.trunc)
        else:
            trunc = min(a.trunc + ob, b.trunc + oa, max(a.trunc, b.trunc))
    if not a._terms or not b._terms:
        return MultiSeries.zero(trunc, mode)
    ga = _grouped(a, trunc)
    gb = _grouped(b, trunc)
    acc = {}
    get = acc.get
    for da, la in enumerate(ga):
        if not la:
            continue
        rest = trunc - da
        for db in range(rest + 1):
            lb = gb[db]
            if not lb:
                continue
            for pa, ca in la:
                for pb, cb in lb:
                    k = pa + pb
                    v = get(k)
                    acc[k] = ca * cb if v is None else v + ca * cb
    out = {}
    for k, c in acc.items():
        if not is_zero(c, mode):
            out[_unpack(k)] = c
    return MultiSeries._raw(out, trunc, mode)


def ms_derive(f: MultiSeries, var) -> MultiSeries:
    """Formal partial derivative; the truncation order drops by one."""
    i = VARS[var]
    out = {}
    for e, c in f._terms.items():
        k = e[i]
        if k == 0:
            continue
        e2 = list(e)
        e2[i] -= 1
        out[tuple(e2)] = c * k
    return MultiSeries._raw(out, max(f.trunc - 1, 0), f.mode)


def _horner_point(point, mode):
    if len(point) != 3:
        raise RejectedInput("evaluation point needs three coordinates (x, y1, y2)")
    if mode == EXACT and all(isinstance(p, (int, Fraction, GaussianRational)) for p in point):
        return [to_exact(p) for p in point], EXACT
    return [to_complex(p) for p in point], FLOAT


def ms_eval(f: MultiSeries, point):
    """Evaluate the truncated series at ``point = (x, y1, y2)`` by nested Horner.

    Exact inputs with exact coordinates give an exact result; otherwise the
    evaluation runs in complex floating point.
    """
    vals, mode = _horner_point(point, f.mode)
    x, y1, y2 = vals
    conv = to_exact if mode == EXACT else to_complex
    nested = defaultdict(lambda: defaultdict(dict))
    for (k0, k1, k2), c in f._terms.items():
        nested[k0][k1][k2] = conv(c)
    zero = zero_of(mode)

    def horner(coeffs: dict, t):
        if not coeffs:
            return zero
        acc = zero
        for k in range(max(coeffs), -1, -1):
            acc = acc * t + coeffs.get(k, zero)
        return acc

    outer = {}
    for k0, by1 in nested.items():
        inner = {k1: horner(by2, y2) for k1, by2 in by1.items()}
        outer[k0] = horner(inner, y1)
    return horner(outer, x)


class _Powers:
    """Lazy cache of powers of one series at a fixed truncation."""

    def __init__(self, g: MultiSeries, trunc: int):
        self.g = g
        self.trunc = trunc
        self.cache = [MultiSeries.constant(1, trunc, g.mode), g.with_trunc(trunc)]
        self.is_x = (g.mode, dict(g._terms)) == (g.mode, {(1, 0, 0): one_of(g.mode)})

    def __getitem__(self, k):
        while len(self.cache) <= k:
            self.cache.append(ms_mul(self.cache[-1], self.cache[1], self.trunc))
        return self.cache[k]


def ms_substitute(f: MultiSeries, gx: MultiSeries, g1: MultiSeries,
                  g2: MultiSeries, trunc: int | None = None) -> MultiSeries:
    """Composition ``f(gx, g1, g2)``; every ``g`` must vanish at the origin."""
    mode = f.mode
    for g in (gx, g1, g2):
        if g.mode != mode:
            raise ModeMismatch("substitution requires a common coefficient mode")
        if (0, 0, 0) in g._terms:
            raise RejectedInput("substituted series must have zero constant term")
    if trunc is None:
        trunc = min(f.trunc, gx.trunc, g1.trunc, g2.trunc)
    px, p1, p2 = _Powers(gx, trunc), _Powers(g1, trunc), _Powers(g2, trunc)
    by_y = defaultdict(dict)
    for (k0, k1, k2), c in f._terms.items():
        if k0 + k1 + k2 <= trunc:
            by_y[(k1, k2)][k0] = c
    result = MultiSeries.zero(trunc, mode)
    for (k1, k2), xs in sorted(by_y.items()):
        yy = ms_mul(p1[k1], p2[k2], trunc)
        if not yy:
            continue
        if px.is_x:
            part = MultiSeries.zero(trunc, mode)
            for k0, c in xs.items():
                part = part + yy.shift((k0, 0, 0), c, trunc)
        else:
            poly = MultiSeries.zero(trunc, mode)
            for k0, c in xs.items():
                poly = poly + px[k0].scale(c)
            part = ms_mul(poly, yy, trunc)
        result = result + part
    return result


def identity_pair(trunc, mode=EXACT):
    return (MultiSeries.var("y1", trunc, mode), MultiSeries.var("y2", trunc, mode))


def _is_tangent(phi: MultiSeries, i: int) -> bool:
    lin = {e: c for e, c in phi._terms.items() if sum(e) <= 1}
    target = [0, 0, 0]
    target[i] = 1
    return lin == {tuple(target): one_of(phi.mode)}


def ms_invert_diffeo(phi1: MultiSeries, phi2: MultiSeries):
    """Inverse of the fibered map (x, y) -> (x, phi1, phi2) tangent to the identity.

    Returns ``(psi1, psi2)`` with ``phi(x, psi) = y`` modulo degree N+1.
    """
    if phi1.mode != phi2.mode:
        raise ModeMismatch("components use different coefficient modes")
    if not (_is_tangent(phi1, 1) and _is_tangent(phi2, 2)):
        raise RejectedInput("linear part of the map is not the identity")
    n = min(phi1.trunc, phi2.trunc)
    mode = phi1.mode
    x = MultiSeries.var("x", n, mode)
    y1, y2 = identity_pair(n, mode)
    h1 = phi1.with_trunc(n) - y1
    h2 = phi2.with_trunc(n) - y2
    psi1, psi2 = y1, y2
    # each pass fixes one more degree
    for d in range(2, n + 1):
        s1 = ms_substitute(h1, x.with_trunc(d), psi1.with_trunc(d), psi2.with_trunc(d), d)
        s2 = ms_substitute(h2, x.with_trunc(d), psi1.with_trunc(d), psi2.with_trunc(d), d)
        psi1 = (y1.with_trunc(d) - s1).with_trunc(n)
        psi2 = (y2.with_trunc(d) - s2).with_trunc(n)
    return psi1.with_trunc(n), psi2.with_trunc(n)


# ---------------------------------------------------------------------------
# univariate series


class UniSeries:
    """Truncated series in one variable; ``coeffs[k]`` multiplies ``t**k``."""

    __slots__ = ("trunc", "mode", "coeffs")

    def __init__(self, coeffs: Iterable = (), trunc: int | None = None,
                 mode: str = EXACT):
        coeffs = [coerce(c, mode) for c in coeffs]
        if trunc is None:
            trunc = max(len(coeffs) - 1, 0)
        if len(coeffs) > trunc + 1:
            coeffs = coeffs[: trunc + 1]
        coeffs = coeffs + [zero_of(mode)] * (trunc + 1 - len(coeffs))
        self.trunc = trunc
        self.mode = mode
        self.coeffs = tuple(coeffs)

    def __getitem__(self, k):
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return zero_of(self.mode)

    def __len__(self):
        return len(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, UniSeries):
            return NotImplemented
        return (self.trunc, self.mode, self.coeffs) == (other.trunc, other.mode, other.coeffs)

    def __hash__(self):
        return hash((self.trunc, self.mode, self.coeffs))

    def __repr__(self):
        return f"UniSeries<{self.mode}, N={self.trunc}>{[to_complex(c) for c in self.coeffs]}"

    def __add__(self, other):
        if other.mode != self.mode:
            raise ModeMismatch("mode mismatch")
        n = min(self.trunc, other.trunc)
        return UniSeries([self[k] + other[k] for k in range(n + 1)], n, self.mode)

    def __neg__(self):
        return UniSeries([-c for c in self.coeffs], self.trunc, self.mode)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, k):
        k = coerce(k, self.mode)
        return UniSeries([c * k for c in self.coeffs], self.trunc, self.mode)

    def __mul__(self, other):
        if not isinstance(other, UniSeries):
            return self.scale(other)
        if other.mode != self.mode:
            raise ModeMismatch("mode mismatch")
        n = min(self.trunc, other.trunc)
        out = [zero_of(self.mode)] * (n + 1)
        for i, a in enumerate(self.coeffs[: n + 1]):
            if is_zero(a, self.mode):
                continue
            for j in range(n + 1 - i):
                out[i + j] = out[i + j] + a * other.coeffs[j]
        return UniSeries(out, n, self.mode)

    def is_zero(self) -> bool:
        return all(is_zero(c, self.mode) for c in self.coeffs)

    def valuation(self):
        for k, c in enumerate(self.coeffs):
            if not is_zero(c, self.mode):
                return k
        return None

    def to_mode(self, mode):
        return UniSeries(self.coeffs, self.trunc, mode)

    def __call__(self, t):
        """Horner evaluation of the truncated polynomial."""
        if self.mode == EXACT and isinstance(t, (int, Fraction, GaussianRational)):
            t = to_exact(t)
            acc = QQ_I.zero
            for c in reversed(self.coeffs):
                acc = acc * t + c
            return acc
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * t + to_complex(c)
        return acc

    def complex_coeffs(self):
        return [to_complex(c) for c in self.coeffs]


# ---------------------------------------------------------------------------
# text literals

_FLOATISH = re.compile(r"[.eEjJ]|inf|nan", re.IGNORECASE)


def _detect_mode(tokens):
    return FLOAT if any(_FLOATISH.search(t) for t in tokens) else EXACT


def _parse_number(tok, mode, lineno):
    try:
        if mode == EXACT:
            return Fraction(tok)
        return float(Fraction(tok)) if "/" in tok else float(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"cannot read number {tok!r}", lineno) from None


def parse_series_lines(lines, mode=None, first_line=1, trunc=None):
    """Parse ``k0 k1 k2 re im`` entries.  Returns a :class:`MultiSeries`.

    ``lines`` may contain a ``trunc_order N`` header, blank lines and
    ``#`` comments.  When ``mode`` is None it is inferred: exact unless a
    token looks like a decimal float.
    """
    entries = []
    for offset, raw in enumerate(lines):
        lineno = first_line + offset
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if toks[0] == "trunc_order":
            if len(toks) != 2 or not toks[1].isdigit():
                raise ParseError("expected 'trunc_order N'", lineno)
            trunc = int(toks[1])
            continue
        if toks[0] == "mode":
            if len(toks) != 2 or toks[1] not in MODES:
                raise ParseError("expected 'mode exact' or 'mode float'", lineno)
            mode = toks[1]
            continue
        if len(toks) != 5:
            raise ParseError(f"expected 5 fields 'k0 k1 k2 re im', got {len(toks)}", lineno)
        try:
            exps = tuple(int(t) for t in toks[:3])
        except ValueError:
            raise ParseError("exponents must be integers", lineno) from None
        if min(exps) < 0:
            raise ParseError("exponents must be non-negative", lineno)
        entries.append((lineno, exps, toks[3], toks[4]))
    if trunc is None:
        raise ParseError("missing 'trunc_order' header", first_line)
    if mode is None:
        mode = _detect_mode([t for e in entries for t in e[2:]])
    terms = {}
    for lineno, exps, re_tok, im_tok in entries:
        if sum(exps) > trunc:
            raise ParseError(f"monomial {exps} exceeds trunc_order {trunc}", lineno)
        val = (_parse_number(re_tok, mode, lineno), _parse_number(im_tok, mode, lineno))
        c = to_exact(val) if mode == EXACT else complex(*val)
        terms[exps] = terms.get(exps, zero_of(mode)) + c
    return MultiSeries(terms, trunc, mode)


def parse_series(text: str, mode=None) -> MultiSeries:
    return parse_series_lines(text.splitlines(), mode)


def format_series_lines(f: MultiSeries, header=True):
    out = [f"trunc_order {f.trunc}"] if header else []
    for e, c in sorted(f.items(), key=lambda t: (sum(t[0]), t[0])):
        re_s, im_s = format_coeff(c, f.mode)
        out.append(f"{e[0]} {e[1]} {e[2]} {re_s} {im_s}")
    return out


def format_series(f: MultiSeries) -> str:
    return "\n".join(format_series_lines(f)) + "\n"
