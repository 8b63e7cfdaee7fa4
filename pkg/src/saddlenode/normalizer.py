"""Formal fibered normalization, degree by degree.

The normalizing map ``phi`` (tangent to the identity) and the normal form

    x^2 d/dx + (-lam + a1 x + c1(v)) y1 d/dy1 + (lam + a2 x + c2(v)) y2 d/dy2,

with v = y1*y2, are found from the conjugacy identity
``D phi . Y = NF o phi`` one total degree at a time.

At degree d the identity is linear in three groups of unknowns:

* the non-resonant coefficients of ``phi`` of degree d, through the
  diagonal action of the linear part;
* the resonant coefficients ``x^j y_i (y1 y2)^k`` of degree d - 1, which
  the linear part cannot see but ``x^2 d/dx`` and the quadratic part of Y
  move up by one degree;
* the free normal-form coefficients of degree d (a1, a2 at d = 2, the
  c-coefficients at odd d).

Everything else in degree d is already known.  The resulting square system
is solved exactly (sparse elimination over Gaussian rationals) or with
numpy in float mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sympy.polys.domains import QQ_I

from .errors import (DegenerateResidue, DivIntegrabilityObstruction,
                     NotTransversallyHamiltonian, RejectedInput,
                     SaddleNodeError, TruncationTooSmall)
from .pscore import (EXACT, MultiSeries, UniSeries, coerce, coeff_abs,
                     exact_parts, is_zero, ms_derive, ms_mul, one_of,
                     to_complex, to_exact, zero_of)
from .vfield import (DiagSaddleNode, FiberedDiffeo, is_transversally_hamiltonian,
                     push_forward, residue)

FLOAT_COND_LIMIT = 1e12


# ---------------------------------------------------------------------------
# normal forms


@dataclass(frozen=True)
class NormalForm:
    lam: object
    a1: object
    a2: object
    c1: UniSeries
    c2: UniSeries

    @property
    def mode(self):
        return self.c1.mode

    @property
    def a(self):
        return self.a1 + self.a2

    @property
    def c(self) -> UniSeries:
        """The single series c = c2 of the div-integrable case (c1 = -c)."""
        return self.c2

    def is_div_integrable(self, tol=0.0) -> bool:
        s = self.c1 + self.c2
        if self.mode == EXACT:
            return s.is_zero()
        return all(abs(z) <= tol for z in s.complex_coeffs())

    @property
    def m_value(self):
        """1/a, or None when a = 0."""
        if is_zero(self.a, self.mode):
            return None
        return one_of(self.mode) / self.a

    @property
    def m(self):
        """1/a when it is a positive integer, else None."""
        mv = self.m_value
        if mv is None:
            return None
        if self.mode == EXACT:
            re_, im_ = exact_parts(mv)
            if im_ == 0 and re_.denominator == 1 and re_ > 0:
                return int(re_)
            return None
        z = complex(mv)
        k = round(z.real)
        if k > 0 and abs(z - k) <= 1e-12 * max(1.0, abs(z)):
            return k
        return None

    @property
    def c_m(self):
        m = self.m
        if m is None:
            return zero_of(self.mode)
        return self.c[m]

    @property
    def c_tilde(self) -> UniSeries:
        """m * sum_{k != m} c_k v^k / (k - m) with m = 1/a."""
        mv = self.m_value
        if mv is None:
            raise RejectedInput("c_tilde needs a nonzero residue")
        m = self.m
        out = [zero_of(self.mode)]
        for k in range(1, len(self.c)):
            if m is not None and k == m:
                out.append(zero_of(self.mode))
            else:
                out.append(mv * self.c[k] / (coerce(k, self.mode) - mv))
        return UniSeries(out, self.c.trunc, self.mode)

    def field(self, trunc: int) -> DiagSaddleNode:
        mode = self.mode
        F1, F2 = {}, {}
        F1[(1, 1, 0)] = self.a1
        F2[(1, 0, 1)] = self.a2
        for k in range(1, len(self.c1)):
            if 2 * k + 1 <= trunc:
                F1[(0, k + 1, k)] = self.c1[k]
                F2[(0, k, k + 1)] = self.c2[k]
        return DiagSaddleNode(self.lam, MultiSeries(F1, trunc, mode),
                              MultiSeries(F2, trunc, mode))

    def to_mode(self, mode):
        return NormalForm(coerce(self.lam, mode), coerce(self.a1, mode),
                          coerce(self.a2, mode), self.c1.to_mode(mode),
                          self.c2.to_mode(mode))

    @classmethod
    def make(cls, lam, a1, a2, c1=(), c2=None, mode=EXACT, trunc=None):
        """Build from plain numbers.  ``c1``/``c2`` list the coefficients of
        v, v^2, ...; when ``c2`` is omitted it is set to ``-c1``."""
        c1 = [coerce(c, mode) for c in c1]
        c2 = [-c for c in c1] if c2 is None else [coerce(c, mode) for c in c2]
        k = max(len(c1), len(c2)) if trunc is None else trunc
        z = zero_of(mode)
        c1 = [z] + c1 + [z] * (k - len(c1))
        c2 = [z] + c2 + [z] * (k - len(c2))
        return cls(coerce(lam, mode), coerce(a1, mode), coerce(a2, mode),
                   UniSeries(c1, k, mode), UniSeries(c2, k, mode))

    @classmethod
    def div_integrable(cls, lam, a1, a2, c=(), mode=EXACT, trunc=None):
        """Normal form with c1 = -c and c2 = c."""
        c = [coerce(v, mode) for v in c]
        return cls.make(lam, a1, a2, [-v for v in c], c, mode, trunc)


# ---------------------------------------------------------------------------
# monomial bookkeeping


def _monomials(d):
    return [(k0, k1, d - k0 - k1) for k0 in range(d + 1) for k1 in range(d - k0 + 1)]


def _diag(i, e, lam):
    """Eigenvalue of the linear part on the monomial ``e`` in component ``i``."""
    k1, k2 = e[1], e[2]
    return lam * (k2 - k1 + 1) if i == 0 else lam * (k2 - k1 - 1)


def _is_resonant(i, e):
    return e[1] == e[2] + 1 if i == 0 else e[2] == e[1] + 1


# ---------------------------------------------------------------------------
# linear algebra


def _solve_exact(rows, rhs, ncols, degree):
    """Sparse Gauss-Jordan over an exact field; rows are dict col -> value."""
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    col_rows = {}
    for ri, r in enumerate(rows):
        for c in r:
            col_rows.setdefault(c, set()).add(ri)
    pivots = {}
    used = set()
    for col in range(ncols):
        cands = [ri for ri in col_rows.get(col, ()) if ri not in used and rows[ri].get(col)]
        if not cands:
            raise DegenerateResidue(
                f"singular homogeneous system at degree {degree} "
                f"(residue obstruction)", degree=degree)
        piv = min(cands, key=lambda ri: len(rows[ri]))
        used.add(piv)
        pivots[col] = piv
        prow = rows[piv]
        pv = prow[col]
        inv = QQ_I.one / pv
        for c in list(prow):
            prow[c] = prow[c] * inv
        rhs[piv] = rhs[piv] * inv
        for ri in list(col_rows.get(col, ())):
            if ri == piv:
                continue
            r = rows[ri]
            f = r.get(col)
            if not f:
                continue
            for c, v in prow.items():
                nv = r.get(c)
                nv = -f * v if nv is None else nv - f * v
                if not nv:
                    r.pop(c, None)
                    col_rows.get(c, set()).discard(ri)
                else:
                    if c not in r:
                        col_rows.setdefault(c, set()).add(ri)
                    r[c] = nv
            rhs[ri] = rhs[ri] - f * rhs[piv]
    for ri, r in enumerate(rows):
        if ri not in used and not r and rhs[ri]:
            raise DegenerateResidue(f"inconsistent system at degree {degree}", degree=degree)
    return [rhs[pivots[c]] for c in range(ncols)]


def _solve_float(rows, rhs, ncols, degree):
    A = np.zeros((len(rows), ncols), dtype=complex)
    for ri, r in enumerate(rows):
        for c, v in r.items():
            A[ri, c] = v
    b = np.array(rhs, dtype=complex)
    if ncols == 0:
        return []
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > FLOAT_COND_LIMIT:
        raise DegenerateResidue(
            f"numerically singular homogeneous system at degree {degree} "
            f"(condition {s[0] / max(s[-1], 1e-300):.2e})", degree=degree)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return list(sol)


# ---------------------------------------------------------------------------
# residual of the conjugacy identity


def _identity_residual_part(phi, Y_comps, lam, a, cs, d, mode):
    """Degree-d coefficients of D phi . Y - NF o phi for both components."""
    p1, p2 = (p.with_trunc(d) for p in phi)
    Y1, Y2 = (c.with_trunc(d) for c in Y_comps)
    x2 = MultiSeries.monomial((2, 0, 0), 1, d, mode)
    x = MultiSeries.var("x", d, mode)
    v = ms_mul(p1, p2, d)
    vpows = [None, v]
    kmax = (d - 1) // 2
    for _ in range(2, kmax + 1):
        vpows.append(ms_mul(vpows[-1], v, d))
    out = []
    for i, p in enumerate((p1, p2)):
        lhs = (ms_mul(x2, ms_derive(p, "x"), d) + ms_mul(ms_derive(p, "y1"), Y1, d)
               + ms_mul(ms_derive(p, "y2"), Y2, d))
        sign_lam = -lam if i == 0 else lam
        factor = MultiSeries.constant(sign_lam, d, mode)
        if a[i] is not None:
            factor = factor + x.scale(a[i])
        for k in range(1, kmax + 1):
            ck = cs[i].get(k)
            if ck is not None and not is_zero(ck, mode):
                factor = factor + vpows[k].scale(ck)
        rhs = ms_mul(factor, p, d)
        out.append((lhs - rhs).degree_part(d))
    return out


# ---------------------------------------------------------------------------
# main solver


@dataclass
class NormalizationResult:
    phi: FiberedDiffeo
    nf: NormalForm
    top_resonant_determined: bool
    degrees_solved: int


def _normalize(Y: DiagSaddleNode, N: int) -> NormalizationResult:
    if N < 2:
        raise RejectedInput("normalization order must be at least 2")
    if Y.trunc < N:
        raise TruncationTooSmall(f"field known to degree {Y.trunc}, need {N}")
    mode = Y.mode
    lam = Y.lam
    Y_comps = Y.components()
    quad = [Y.F1.degree_part(2), Y.F2.degree_part(2)]
    # phi stored as dicts, identity linear part
    phi_terms = [{(0, 1, 0): one_of(mode)}, {(0, 0, 1): one_of(mode)}]
    a = [None, None]
    cs = [{}, {}]
    last = min(N + 1, Y.trunc)
    solve = _solve_exact if mode == EXACT else _solve_float
    for d in range(2, last + 1):
        cols = []
        for i in (0, 1):
            for e in _monomials(d):
                if not _is_resonant(i, e):
                    cols.append(("phi", i, e))
        if d - 1 >= 2:
            for i in (0, 1):
                for e in _monomials(d - 1):
                    if _is_resonant(i, e):
                        cols.append(("phi", i, e))
        if d == 2:
            cols += [("a", 0), ("a", 1)]
        elif d % 2 == 1:
            k = (d - 1) // 2
            cols += [("c", 0, k), ("c", 1, k)]
        eqs = [(i, e) for i in (0, 1) for e in _monomials(d)]
        eq_index = {q: n for n, q in enumerate(eqs)}
        rows = [dict() for _ in eqs]

        def put(i, e, col, val):
            if is_zero(val, mode):
                return
            r = rows[eq_index[(i, e)]]
            r[col] = r.get(col, zero_of(mode)) + val
            if is_zero(r[col], mode):
                del r[col]

        for ci, col in enumerate(cols):
            kind = col[0]
            if kind == "phi":
                _, i, e = col
                if sum(e) == d:
                    put(i, e, ci, _diag(i, e, lam))
                    continue
                k0, k1, k2 = e
                if k0:
                    put(i, (k0 + 1, k1, k2), ci, coerce(k0, mode))
                if a[i] is not None:
                    put(i, (k0 + 1, k1, k2), ci, -a[i])
                for j, q in ((1, quad[0]), (2, quad[1])):
                    kj = e[j]
                    if not kj:
                        continue
                    for t, tc in q.items():
                        ne = [e[0] + t[0], e[1] + t[1], e[2] + t[2]]
                        ne[j] -= 1
                        put(i, tuple(ne), ci, tc * kj)
            elif kind == "a":
                i = col[1]
                put(i, (1, 1, 0) if i == 0 else (1, 0, 1), ci, -one_of(mode))
            else:
                _, i, k = col
                put(i, (0, k + 1, k) if i == 0 else (0, k, k + 1), ci, -one_of(mode))

        phi_series = [MultiSeries(t, N, mode) for t in phi_terms]
        res = _identity_residual_part(phi_series, Y_comps, lam, a, cs, d, mode)
        rhs = [-res[i].coeff(e) for (i, e) in eqs]
        sol = solve(rows, rhs, len(cols), d)
        for col, val in zip(cols, sol):
            kind = col[0]
            if kind == "phi":
                _, i, e = col
                if sum(e) > N:
                    continue
                if not is_zero(val, mode):
                    phi_terms[i][e] = val
            elif kind == "a":
                a[col[1]] = val
            else:
                cs[col[1]][col[2]] = val

    kmax = (N - 1) // 2
    z = zero_of(mode)
    c1 = UniSeries([z] + [cs[0].get(k, z) for k in range(1, kmax + 1)], kmax, mode)
    c2 = UniSeries([z] + [cs[1].get(k, z) for k in range(1, kmax + 1)], kmax, mode)
    nf = NormalForm(lam, a[0], a[1], c1, c2)
    phi = FiberedDiffeo(MultiSeries(phi_terms[0], N, mode), MultiSeries(phi_terms[1], N, mode))
    return NormalizationResult(phi, nf, Y.trunc >= N + 1, last)


def normalize(Y: DiagSaddleNode, N: int):
    """Formal normalizing map and normal form of ``Y`` to total degree ``N``.

    Returns ``(phi, nf)`` with ``push_forward(phi, Y) == nf.field(N)``
    modulo degree N + 1.  The resonant coefficients of ``phi`` of degree
    exactly N are fixed by the degree N + 1 equations and are therefore
    only computed when ``Y.trunc > N`` (they are left at zero otherwise;
    they do not affect the identity modulo degree N + 1).
    """
    r = _normalize(Y, N)
    return r.phi, r.nf


def normalize_full(Y: DiagSaddleNode, N: int) -> NormalizationResult:
    return _normalize(Y, N)


def _first_c_defect(nf: NormalForm, tol: float):
    s = nf.c1 + nf.c2
    for k in range(1, len(s)):
        val = s[k]
        bad = bool(val) if nf.mode == EXACT else abs(to_complex(val)) > tol
        if bad:
            return k, val
    return None


def normalize_div_integrable(Y: DiagSaddleNode, N: int, tol: float = 1e-10):
    """As :func:`normalize`, additionally certifying c1 + c2 = 0.

    The returned normal form satisfies ``nf.c1 == -nf.c2`` and ``nf.c`` is
    the series c of the div-integrable normal form.
    """
    phi, nf = normalize(Y, N)
    bad = _first_c_defect(nf, tol)
    if bad is not None:
        k, val = bad
        raise DivIntegrabilityObstruction(
            f"c1 + c2 has nonzero coefficient {to_complex(val):.6g} at v^{k}",
            witness=(0, k, k), value=val)
    if nf.mode != EXACT:
        nf = NormalForm(nf.lam, nf.a1, nf.a2, -nf.c2, nf.c2)
    return phi, nf


def normalize_symplectic(Y: DiagSaddleNode, N: int, tol: float = 1e-10):
    """Normalization of a transversally Hamiltonian field.

    By uniqueness of the formal normalization the map found by
    :func:`normalize` is the transversally symplectic one; this function
    checks the Hamiltonian hypothesis and then asserts a1 + a2 = 1,
    c1 + c2 = 0 and det(D phi) = 1 on every degree where ``phi`` is fully
    determined.
    """
    if not is_transversally_hamiltonian(Y):
        raise NotTransversallyHamiltonian(
            "dF1/dy1 + dF2/dy2 differs from x; the field is not transversally Hamiltonian")
    r = _normalize(Y, N)
    phi, nf = r.phi, r.nf
    bad = _first_c_defect(nf, tol)
    a_sum = nf.a
    one = one_of(nf.mode)
    a_ok = (a_sum == one) if nf.mode == EXACT else abs(to_complex(a_sum) - 1) <= tol
    if bad is not None or not a_ok:
        raise SaddleNodeError("symplectic normalization check failed on the normal form")
    top = N - 1 if r.top_resonant_determined else N - 2
    defect = symplectic_defect(phi, top)
    if (nf.mode == EXACT and defect != 0) or defect > tol:
        raise SaddleNodeError(f"det(D phi) - 1 = {defect:g} below degree {top + 1}")
    return phi, nf


def symplectic_defect(phi: FiberedDiffeo, top: int | None = None) -> float:
    """Largest coefficient of det(D phi) - 1 over degrees <= ``top``."""
    det = phi.jacobian_det()
    if top is None:
        top = det.trunc
    det = det - MultiSeries.constant(1, det.trunc, det.mode)
    vals = [coeff_abs(c) for e, c in det.items() if sum(e) <= top]
    return max(vals, default=0.0)


def verify_normalization(Y: DiagSaddleNode, phi: FiberedDiffeo, nf: NormalForm,
                         N: int) -> float:
    """Largest coefficient of push_forward(phi, Y) minus the normal-form field."""
    n = min(N, Y.trunc, phi.trunc)
    Z = push_forward(phi.to_mode(Y.mode), Y.truncate(n))
    target = nf.to_mode(Y.mode).field(n)
    diff1 = Z.F1 - target.F1
    diff2 = Z.F2 - target.F2
    d_lam = coeff_abs(Z.lam - target.lam)
    return max(diff1.max_abs(), diff2.max_abs(), d_lam)


# ---------------------------------------------------------------------------
# orbital jet test on {x = 0}


def orbital_obstruction(Y: DiagSaddleNode, jet_order: int):
    """Poincare-Dulac normalization of Y restricted to {x = 0}.

    Returns None when the restricted field is orbitally linear up to
    ``jet_order``, else ``((0, k, k), value)`` for the first v^k where
    c1 + c2 of the planar normal form does not vanish.
    """
    mode = Y.mode
    lam = Y.lam
    from .vfield import restrict_x0

    Z = restrict_x0(Y)
    phi_terms = [{(0, 1, 0): one_of(mode)}, {(0, 0, 1): one_of(mode)}]
    cs = [{}, {}]
    none = [None, None]
    for d in range(2, jet_order + 1):
        phi_series = [MultiSeries(t, jet_order, mode) for t in phi_terms]
        res = _identity_residual_part(phi_series, Z, lam, none, cs, d, mode)
        for i in (0, 1):
            for e in _monomials(d):
                if e[0]:
                    continue
                r = res[i].coeff(e)
                if is_zero(r, mode):
                    continue
                if _is_resonant(i, e):
                    cs[i][e[2] if i == 0 else e[1]] = r
                else:
                    phi_terms[i][e] = -r / _diag(i, e, lam)
        if d % 2 == 1:
            k = (d - 1) // 2
            s = cs[0].get(k, zero_of(mode)) + cs[1].get(k, zero_of(mode))
            small = (not s) if mode == EXACT else abs(to_complex(s)) <= 1e-10 * max(1.0, abs(to_complex(lam)))
            if not small:
                return (0, k, k), s
    return None
