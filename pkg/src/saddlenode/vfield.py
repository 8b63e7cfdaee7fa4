"""Diagonal doubly-resonant saddle-node vector fields.

A field is stored as ``lam`` together with the nonlinear parts ``F1``,
``F2`` of

    Y = x^2 d/dx + (-lam*y1 + F1) d/dy1 + (lam*y2 + F2) d/dy2,

with ``F1``, ``F2`` of order at least two.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ModeMismatch, ParseError, RejectedInput
from .pscore import (EXACT, FLOAT, MultiSeries, coerce, exact_parts, is_zero,
                     ms_derive, ms_invert_diffeo, ms_mul, ms_substitute,
                     parse_series_lines, to_complex, format_series_lines,
                     format_coeff)

UNCERTIFIED_TOL = 1e-9
UNCERTIFIED_MAX_DEN = 64


@dataclass(frozen=True)
class DiagSaddleNode:
    lam: object
    F1: MultiSeries
    F2: MultiSeries

    def __post_init__(self):
        if self.F1.mode != self.F2.mode:
            raise ModeMismatch("F1 and F2 use different coefficient modes")
        lam = coerce(self.lam, self.F1.mode)
        if is_zero(lam, self.F1.mode):
            raise RejectedInput("lambda must be nonzero")
        object.__setattr__(self, "lam", lam)
        for name, F in (("F1", self.F1), ("F2", self.F2)):
            if not F.has_order_at_least(2):
                raise RejectedInput(f"{name} must have order at least two")
        if self.F1.trunc != self.F2.trunc:
            n = min(self.F1.trunc, self.F2.trunc)
            object.__setattr__(self, "F1", self.F1.truncate(n))
            object.__setattr__(self, "F2", self.F2.truncate(n))

    @property
    def mode(self):
        return self.F1.mode

    @property
    def trunc(self):
        return self.F1.trunc

    def components(self):
        """The full d/dy1 and d/dy2 components."""
        n, mode = self.trunc, self.mode
        y1 = MultiSeries.var("y1", n, mode)
        y2 = MultiSeries.var("y2", n, mode)
        return (y1.scale(-self.lam) + self.F1, y2.scale(self.lam) + self.F2)

    def truncate(self, n):
        return DiagSaddleNode(self.lam, self.F1.truncate(n), self.F2.truncate(n))

    def to_mode(self, mode):
        return DiagSaddleNode(coerce(self.lam, mode), self.F1.to_mode(mode),
                              self.F2.to_mode(mode))

    @classmethod
    def from_components(cls, lam, Y1, Y2):
        n, mode = Y1.trunc, Y1.mode
        lam = coerce(lam, mode)
        y1 = MultiSeries.var("y1", n, mode)
        y2 = MultiSeries.var("y2", n, mode)
        return cls(lam, Y1 + y1.scale(lam), Y2 - y2.scale(lam))


@dataclass(frozen=True)
class FiberedDiffeo:
    """The map (x, y1, y2) -> (x, phi1, phi2), tangent to the identity."""

    phi1: MultiSeries
    phi2: MultiSeries

    def __post_init__(self):
        if self.phi1.mode != self.phi2.mode:
            raise ModeMismatch("components use different coefficient modes")
        n = min(self.phi1.trunc, self.phi2.trunc)
        y1 = MultiSeries.var("y1", n, self.phi1.mode)
        y2 = MultiSeries.var("y2", n, self.phi1.mode)
        if not ((self.phi1.with_trunc(n) - y1).has_order_at_least(2)
                and (self.phi2.with_trunc(n) - y2).has_order_at_least(2)):
            raise RejectedInput("fibered map is not tangent to the identity")

    @classmethod
    def identity(cls, trunc, mode=EXACT):
        return cls(MultiSeries.var("y1", trunc, mode), MultiSeries.var("y2", trunc, mode))

    @property
    def mode(self):
        return self.phi1.mode

    @property
    def trunc(self):
        return min(self.phi1.trunc, self.phi2.trunc)

    def inverse(self) -> "FiberedDiffeo":
        return FiberedDiffeo(*ms_invert_diffeo(self.phi1, self.phi2))

    def compose(self, other: "FiberedDiffeo") -> "FiberedDiffeo":
        """``self o other``."""
        n = min(self.trunc, other.trunc)
        x = MultiSeries.var("x", n, self.mode)
        return FiberedDiffeo(ms_substitute(self.phi1, x, other.phi1, other.phi2, n),
                             ms_substitute(self.phi2, x, other.phi1, other.phi2, n))

    def jacobian_det(self) -> MultiSeries:
        """det of d(phi1, phi2)/d(y1, y2); valid to degree trunc - 1."""
        a = ms_derive(self.phi1, "y1")
        b = ms_derive(self.phi1, "y2")
        c = ms_derive(self.phi2, "y1")
        d = ms_derive(self.phi2, "y2")
        return ms_mul(a, d) - ms_mul(b, c)

    def is_identity(self) -> bool:
        ident = FiberedDiffeo.identity(self.trunc, self.mode)
        return (self.phi1.with_trunc(self.trunc) == ident.phi1
                and self.phi2.with_trunc(self.trunc) == ident.phi2)

    def to_mode(self, mode):
        return FiberedDiffeo(self.phi1.to_mode(mode), self.phi2.to_mode(mode))


def residue(Y: DiagSaddleNode):
    """Coefficient of x*y1 in F1 plus coefficient of x*y2 in F2."""
    return Y.F1.coeff((1, 1, 0)) + Y.F2.coeff((1, 0, 1))


def restrict_x0(Y: DiagSaddleNode):
    """The d/dy components of Y on {x = 0}, as series in (y1, y2)."""
    out = []
    for comp in Y.components():
        out.append(MultiSeries({e: c for e, c in comp.items() if e[0] == 0},
                               comp.trunc, comp.mode))
    return tuple(out)


def y_divergence(Y: DiagSaddleNode) -> MultiSeries:
    return ms_derive(Y.F1, "y1") + ms_derive(Y.F2, "y2")


def hamiltonian_defect(Y: DiagSaddleNode) -> MultiSeries:
    """Series that vanishes exactly when Y is transversally Hamiltonian.

    With omega = dy1^dy2 / x one finds, modulo dx,
    L_Y(omega) = (div_y(Y)/x - 1) dy1^dy2, since Y(1/x) = -1.  The
    condition is therefore dF1/dy1 + dF2/dy2 = x.
    """
    div = y_divergence(Y)
    return div - MultiSeries.var("x", div.trunc, div.mode)


def is_transversally_hamiltonian(Y: DiagSaddleNode, tol=1e-12) -> bool:
    defect = hamiltonian_defect(Y)
    if Y.mode == EXACT:
        return not defect
    scale = max(1.0, Y.F1.max_abs(), Y.F2.max_abs())
    return defect.max_abs() <= tol * scale


def _nearest_small_rational(z: float):
    best = None
    for q in range(1, UNCERTIFIED_MAX_DEN + 1):
        p = round(z * q)
        err = abs(z - p / q)
        if best is None or err < best[0]:
            best = (err, Fraction(p, q))
    return best


def nondegeneracy(res, mode):
    """Decide res not in Q<=0.  Returns (verdict, note); verdict None = uncertified."""
    if mode == EXACT:
        re_, im_ = exact_parts(res)
        in_q = im_ == 0 and re_ <= 0
        return (not in_q, f"exact: res {'is' if in_q else 'is not'} in Q<=0")
    z = to_complex(res)
    if abs(z.imag) <= UNCERTIFIED_TOL and z.real <= UNCERTIFIED_TOL:
        err, frac = _nearest_small_rational(z.real)
        if err <= UNCERTIFIED_TOL and frac <= 0:
            return None, (f"uncertified: float residue within {err:.1e} of "
                          f"{frac} (denominator <= {UNCERTIFIED_MAX_DEN})")
    return True, (f"float: residue not within {UNCERTIFIED_TOL:g} of a "
                  f"non-positive rational with denominator <= {UNCERTIFIED_MAX_DEN}")


@dataclass
class ClassificationReport:
    residue: object
    nondegenerate: bool | None
    nondegenerate_note: str
    strictly_nondegenerate: bool
    div_integrable_to_order: int
    div_obstruction: tuple | None
    transversally_hamiltonian: bool
    mode: str = EXACT
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        re_s, im_s = format_coeff(self.residue, self.mode)
        return {
            "residue": {"re": re_s, "im": im_s},
            "nondegenerate": ("uncertified" if self.nondegenerate is None
                              else self.nondegenerate),
            "nondegenerate_note": self.nondegenerate_note,
            "strictly_nondegenerate": self.strictly_nondegenerate,
            "div_integrable_to_order": self.div_integrable_to_order,
            "div_obstruction": (None if self.div_obstruction is None else {
                "monomial": list(self.div_obstruction[0]),
                "coefficient": list(format_coeff(self.div_obstruction[1], self.mode)),
            }),
            "transversally_hamiltonian": self.transversally_hamiltonian,
        }


def classify(Y: DiagSaddleNode, jet_order: int) -> ClassificationReport:
    """Residue, non-degeneracy, div-integrability jet and Hamiltonian tests."""
    from .normalizer import orbital_obstruction

    if jet_order > Y.trunc:
        raise RejectedInput(f"jet_order {jet_order} exceeds trunc_order {Y.trunc}")
    if jet_order < 1:
        raise RejectedInput("jet_order must be positive")
    res = residue(Y)
    nd, note = nondegeneracy(res, Y.mode)
    obstruction = orbital_obstruction(Y, jet_order)
    if obstruction is None:
        div_order = jet_order
    else:
        # the witness v^k sits on the degree 2k+1 monomials y_i v^k
        div_order = 2 * obstruction[0][1]
    return ClassificationReport(
        residue=res,
        nondegenerate=nd,
        nondegenerate_note=note,
        strictly_nondegenerate=to_complex(res).real > 0,
        div_integrable_to_order=div_order,
        div_obstruction=obstruction,
        transversally_hamiltonian=is_transversally_hamiltonian(Y),
        mode=Y.mode,
    )


def push_forward(phi: FiberedDiffeo, Y: DiagSaddleNode) -> DiagSaddleNode:
    """(D phi . Y) o phi^{-1}; the x^2 d/dx component is untouched."""
    if phi.mode != Y.mode:
        raise ModeMismatch("map and field use different coefficient modes")
    n = min(phi.trunc, Y.trunc)
    mode = Y.mode
    psi = ms_invert_diffeo(phi.phi1.with_trunc(n), phi.phi2.with_trunc(n))
    Y1, Y2 = (c.with_trunc(n) for c in Y.components())
    x = MultiSeries.var("x", n, mode)
    x2 = MultiSeries.monomial((2, 0, 0), 1, n, mode)
    out = []
    for p in (phi.phi1.with_trunc(n), phi.phi2.with_trunc(n)):
        G = (ms_mul(x2, ms_derive(p, "x"), n) + ms_mul(ms_derive(p, "y1"), Y1, n)
             + ms_mul(ms_derive(p, "y2"), Y2, n))
        out.append(ms_substitute(G, x, psi[0], psi[1], n))
    return DiagSaddleNode.from_components(Y.lam, out[0], out[1])


def conjugacy_defect(phi: FiberedDiffeo, Y: DiagSaddleNode, target: DiagSaddleNode):
    """D phi . Y - target o phi, which vanishes iff phi_* Y = target."""
    n = min(phi.trunc, Y.trunc, target.trunc)
    mode = Y.mode
    p1, p2 = phi.phi1.with_trunc(n), phi.phi2.with_trunc(n)
    Y1, Y2 = (c.with_trunc(n) for c in Y.components())
    T1, T2 = (c.with_trunc(n) for c in target.components())
    x = MultiSeries.var("x", n, mode)
    x2 = MultiSeries.monomial((2, 0, 0), 1, n, mode)
    out = []
    for p, T in ((p1, T1), (p2, T2)):
        G = (ms_mul(x2, ms_derive(p, "x"), n) + ms_mul(ms_derive(p, "y1"), Y1, n)
             + ms_mul(ms_derive(p, "y2"), Y2, n))
        out.append(G - ms_substitute(T, x, p1, p2, n))
    return tuple(out)


# ---------------------------------------------------------------------------
# text document


def parse_field(text: str, mode=None) -> DiagSaddleNode:
    """Read a vector-field document (``lambda``, ``trunc_order``, ``F1``, ``F2``)."""
    lines = text.splitlines()
    lam_tokens = None
    trunc = None
    blocks = {}
    current = None
    for i, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        key = toks[0]
        if key == "lambda":
            if len(toks) not in (2, 3):
                raise ParseError("expected 'lambda re [im]'", i)
            lam_tokens = (toks[1], toks[2] if len(toks) == 3 else "0", i)
            current = None
        elif key == "trunc_order":
            if len(toks) != 2 or not toks[1].isdigit():
                raise ParseError("expected 'trunc_order N'", i)
            trunc = int(toks[1])
            current = None
        elif key == "mode":
            if len(toks) != 2 or toks[1] not in (EXACT, FLOAT):
                raise ParseError("expected 'mode exact' or 'mode float'", i)
            mode = toks[1]
        elif key in ("F1", "F2"):
            if len(toks) != 1:
                raise ParseError(f"block header '{key}' takes no arguments", i)
            if key in blocks:
                raise ParseError(f"duplicate block {key}", i)
            blocks[key] = []
            current = key
        else:
            if current is None:
                raise ParseError(f"unexpected line outside F1/F2 blocks: {line!r}", i)
            blocks[current].append((i, raw))
    if lam_tokens is None:
        raise ParseError("missing 'lambda' line", None)
    if trunc is None:
        raise ParseError("missing 'trunc_order' line", None)
    if mode is None:
        floaty = any(ch in tok for tok in lam_tokens[:2] for ch in ".eEjJ")
        for key in blocks:
            for _, raw in blocks[key]:
                toks = raw.split("#", 1)[0].split()
                if any(ch in t for t in toks[3:] for ch in ".eEjJ"):
                    floaty = True
        mode = FLOAT if floaty else EXACT
    series = {}
    for key in ("F1", "F2"):
        entries = blocks.get(key, [])
        if entries:
            first = entries[0][0]
            # pad with blanks so parse errors keep the document's line numbers
            body = []
            expected = first
            for lineno, raw in entries:
                body.extend([""] * (lineno - expected))
                body.append(raw)
                expected = lineno + 1
            series[key] = parse_series_lines(body, mode, first_line=first, trunc=trunc)
        else:
            series[key] = MultiSeries.zero(trunc, mode)
    def num(tok):
        if mode == EXACT or "/" in tok:
            return Fraction(tok)
        return float(tok)

    try:
        lam = (num(lam_tokens[0]), num(lam_tokens[1]))
    except (ValueError, ZeroDivisionError):
        raise ParseError("cannot read lambda", lam_tokens[2]) from None
    try:
        return DiagSaddleNode(lam, series["F1"], series["F2"])
    except RejectedInput as exc:
        raise ParseError(str(exc), None) from exc


def format_field(Y: DiagSaddleNode) -> str:
    re_s, im_s = format_coeff(Y.lam, Y.mode)
    out = [f"mode {Y.mode}", f"lambda {re_s} {im_s}", f"trunc_order {Y.trunc}", "F1"]
    out += format_series_lines(Y.F1, header=False)
    out.append("F2")
    out += format_series_lines(Y.F2, header=False)
    return "\n".join(out) + "\n"
