"""Sectorial normalizations, Stokes isotropies and their leaf-space coefficients.

Pipeline
--------
1. ``sectorial_normalization`` sums every y-monomial coefficient of the
   formal normalizing map in the direction arg(i lam) (side ``plus``) or
   arg(-i lam) (side ``minus``).  At a fixed x the result is a polynomial
   map in (y1, y2).
2. ``stokes_diffeo`` forms psi_lam = Phi_plus o Phi_minus^{-1} on the narrow
   sector around arg(lam), and psi_-lam = Phi_minus o Phi_plus^{-1} around
   arg(-lam).  Inverses come from Newton's method.
3. In leaf coordinates (h1, h2) the isotropy reads::

       Psi_j(h1, h2) = h_j + sum_n Psi_{j,n}(h1 h2) h^n

   with h = h1 on the lam side and h = h2 on the -lam side.  Holding
   w = h1 h2 fixed, these are Laurent coefficients in h, extracted by the
   trapezoidal rule on a circle, and a second trapezoidal rule on a circle
   in w turns each entire function Psi_{j,n} into a Taylor table.

The lam side keeps n >= 2 for j = 1 and n >= 0 for j = 2.  The -lam side
keeps n >= 0 for j = 1 and n >= 2 for j = 2.  The identity terms h_j show up
as the forced coefficients Psi_{1,lam,1} = Psi_{2,-lam,1} = 1 and
Psi_{2,lam,-1} = Psi_{1,-lam,-1} = w.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (AnnulusEmpty, InsufficientRange, MonomialCutoffTooSmall,
                     NewtonDivergence, RejectedInput)
from .leafspace import LeafChart, first_integrals, f_eval, leaf_param, sector_for
from .normalizer import NormalForm
from .pscore import FLOAT, UniSeries
from .summation import borel_transform, laplace_sum_detailed
from .vfield import DiagSaddleNode, FiberedDiffeo

NEWTON_TOL = 1e-10
NARROW = ("lambda", "-lambda")


def _side_key(side):
    if side in ("+", "plus", "+lambda", "lambda"):
        return "+"
    if side in ("-", "minus", "-lambda"):
        return "-"
    raise RejectedInput(f"unknown side {side!r}")


def narrow_side(side):
    return "lambda" if _side_key(side) == "+" else "-lambda"


def first_index(j, side):
    """Smallest stored Laurent index: N(j, side) + 1."""
    s = _side_key(side)
    if (j, s) in ((1, "+"), (2, "-")):
        return 2
    return 0


# ---------------------------------------------------------------------------
# polynomial maps at fixed x


class PolyMap:
    """(y1, y2) -> (P1(y), P2(y)) with complex coefficients, vectorized."""

    def __init__(self, c1: dict, c2: dict):
        self.c1 = {k: complex(v) for k, v in c1.items() if v != 0}
        self.c2 = {k: complex(v) for k, v in c2.items() if v != 0}
        self.deg = max([sum(k) for k in list(self.c1) + list(self.c2)], default=1)

    @classmethod
    def identity(cls):
        return cls({(1, 0): 1.0}, {(0, 1): 1.0})

    def _powers(self, y):
        p = [np.ones_like(y)]
        for _ in range(self.deg):
            p.append(p[-1] * y)
        return p

    def __call__(self, y1, y2):
        y1 = np.asarray(y1, dtype=complex)
        y2 = np.asarray(y2, dtype=complex)
        p1, p2 = self._powers(y1), self._powers(y2)
        z1 = sum((c * p1[a] * p2[b] for (a, b), c in self.c1.items()), np.zeros_like(y1))
        z2 = sum((c * p1[a] * p2[b] for (a, b), c in self.c2.items()), np.zeros_like(y1))
        return z1, z2

    def jacobian(self, y1, y2):
        y1 = np.asarray(y1, dtype=complex)
        y2 = np.asarray(y2, dtype=complex)
        p1, p2 = self._powers(y1), self._powers(y2)
        zero = np.zeros_like(y1)
        out = []
        for cs in (self.c1, self.c2):
            d1 = sum((a * c * p1[a - 1] * p2[b] for (a, b), c in cs.items() if a), zero)
            d2 = sum((b * c * p1[a] * p2[b - 1] for (a, b), c in cs.items() if b), zero)
            out.append((d1, d2))
        return out

    def inverse(self, z1, z2, tol=NEWTON_TOL, max_halvings=12):
        """Solve P(y) = z by Newton's method with continuation.

        The target moves along the segment from P(0) to z, starting from
        the root y = 0; a failed step is halved.
        """
        z1 = np.asarray(z1, dtype=complex)
        z2 = np.asarray(z2, dtype=complex)
        p1 = self.c1.get((0, 0), 0j)
        p2 = self.c2.get((0, 0), 0j)
        try:
            return self._newton(z1, z2, z1 - p1, z2 - p2, tol)
        except NewtonDivergence:
            pass
        y1 = np.zeros_like(z1)
        y2 = np.zeros_like(z2)
        s, ds, halvings = 0.0, 0.25, 0
        while s < 1.0:
            t = min(1.0, s + ds)
            t1, t2 = p1 + t * (z1 - p1), p2 + t * (z2 - p2)
            try:
                y1, y2 = self._newton(t1, t2, y1, y2, tol if t == 1.0 else 1e-8)
                s = t
                ds = min(2 * ds, 0.5)
            except NewtonDivergence:
                halvings += 1
                if halvings > max_halvings:
                    raise
                ds /= 2
        return y1, y2

    def _newton(self, z1, z2, y1, y2, tol, max_iter=40):
        with np.errstate(all="ignore"):
            return self._newton_raw(z1, z2, y1, y2, tol, max_iter)

    def _newton_raw(self, z1, z2, y1, y2, tol, max_iter):
        y1 = np.array(y1, dtype=complex)
        y2 = np.array(y2, dtype=complex)
        scale = 1.0 + np.maximum(np.abs(z1), np.abs(z2))
        extra = 1
        for _ in range(max_iter):
            f1, f2 = self(y1, y2)
            r1, r2 = f1 - z1, f2 - z2
            (a, b), (c, d) = self.jacobian(y1, y2)
            det = a * d - b * c
            if np.any(det == 0) or not np.all(np.isfinite(det)):
                raise NewtonDivergence("singular Jacobian during inversion")
            s1 = (d * r1 - b * r2) / det
            s2 = (a * r2 - c * r1) / det
            y1, y2 = y1 - s1, y2 - s2
            step = np.max(np.maximum(np.abs(s1), np.abs(s2)) / scale)
            if not np.isfinite(step):
                raise NewtonDivergence("Newton iteration diverged")
            if step < tol:
                if extra == 0:
                    return y1, y2
                extra -= 1
        raise NewtonDivergence(f"Newton iteration did not reach {tol:g}")


# ---------------------------------------------------------------------------
# sectorial normalizations


def _monomial_series(phi, N):
    """Group a series by y-exponent: (k1, k2) -> UniSeries in x."""
    groups = {}
    for (k0, k1, k2), c in phi.items():
        groups.setdefault((k1, k2), {})[k0] = complex(c)
    out = {}
    for k, cs in groups.items():
        n = N - k[0] - k[1]
        out[k] = UniSeries([cs.get(i, 0j) for i in range(n + 1)], n, FLOAT)
    return out


@dataclass
class SectorialNormalization:
    side: str
    lam: complex
    theta: float
    series: dict
    pade: tuple | None = None
    samples: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    def at(self, x) -> PolyMap:
        x = complex(x)
        if x not in self.samples:
            coeffs = [{}, {}]
            err = 0.0
            for i in (0, 1):
                for k, b in self.series[i].items():
                    r = laplace_sum_detailed(b, self.theta, x, self.pade)
                    coeffs[i][k] = r.value
                    err = max(err, r.error_estimate)
            self.samples[x] = PolyMap(coeffs[0], coeffs[1])
            self.errors[x] = err
        return self.samples[x]

    def __call__(self, x, y1, y2):
        return self.at(x)(y1, y2)

    @property
    def grid(self):
        return list(self.samples)


def sectorial_normalization(Y: DiagSaddleNode, phi_hat: FiberedDiffeo, side: str,
                            grid=(), pade=None, y_radius=None, tail_tol=None):
    """Borel-Laplace sums of the normalizing map on the sector ``plus`` or ``minus``.

    ``grid`` lists the x-samples evaluated eagerly; further points are
    summed on demand.  When ``y_radius`` and ``tail_tol`` are both given,
    the size of the top-degree y-monomials on that polydisc is compared
    with ``tail_tol`` and MonomialCutoffTooSmall is raised if it is larger.
    """
    s = _side_key(side)
    lam = complex(Y.to_mode(FLOAT).lam)
    theta = cmath.phase(1j * lam) if s == "+" else cmath.phase(-1j * lam)
    N = phi_hat.trunc
    phi = phi_hat.to_mode(FLOAT)
    series = []
    for comp in (phi.phi1, phi.phi2):
        groups = _monomial_series(comp, N)
        series.append({k: borel_transform(u) for k, u in groups.items()})
    out = SectorialNormalization("plus" if s == "+" else "minus", lam, theta, series,
                                 None if pade is None else tuple(pade))
    for x in grid:
        out.at(x)
    if y_radius is not None and tail_tol is not None:
        top = max(sum(k) for i in (0, 1) for k in series[i])
        tail = 0.0
        for pm in out.samples.values():
            for cs in (pm.c1, pm.c2):
                for k, c in cs.items():
                    if sum(k) == top:
                        tail = max(tail, abs(c) * y_radius ** top)
        if tail > tail_tol:
            raise MonomialCutoffTooSmall(
                f"degree-{top} terms contribute {tail:.3g} > {tail_tol:g} on |y| <= {y_radius}")
    return out


# ---------------------------------------------------------------------------
# isotropies


class Isotropy:
    """A sectorial map psi(x, y1, y2) attached to a narrow side."""

    def __init__(self, side, func, xs=()):
        self.side = narrow_side(side)
        self.func = func
        self.xs = list(xs)

    def __call__(self, x, y1, y2):
        return self.func(complex(x), y1, y2)


def stokes_diffeo(map_plus: SectorialNormalization, map_minus: SectorialNormalization,
                  narrow: str, grid=(), tol=NEWTON_TOL) -> Isotropy:
    """psi_lam = Phi_plus o Phi_minus^{-1} or psi_-lam = Phi_minus o Phi_plus^{-1}."""
    if _side_key(narrow) == "+":
        outer, inner = map_plus, map_minus
    else:
        outer, inner = map_minus, map_plus

    def psi(x, y1, y2):
        u1, u2 = inner.at(x).inverse(y1, y2, tol)
        return outer.at(x)(u1, u2)

    iso = Isotropy(narrow, psi, grid)
    for x in grid:
        psi(x, np.zeros(1), np.zeros(1))
    return iso


def identity_isotropy(side):
    return Isotropy(side, lambda x, y1, y2: (np.asarray(y1, dtype=complex),
                                             np.asarray(y2, dtype=complex)))


def isotropy_residual(psi: Isotropy, nf: NormalForm, x, y1, y2, h=1e-4):
    """max |D psi . Y_norm - Y_norm o psi| by central differences at one point."""
    f = nf.to_mode(FLOAT)
    lam, a1, a2 = complex(f.lam), complex(f.a1), complex(f.a2)
    c1 = np.array(f.c1.complex_coeffs()[::-1], dtype=complex)
    c2 = np.array(f.c2.complex_coeffs()[::-1], dtype=complex)

    def field_(x, y1, y2):
        v = y1 * y2
        return ((-lam + a1 * x + np.polyval(c1, v)) * y1,
                (lam + a2 * x + np.polyval(c2, v)) * y2)

    y1 = np.atleast_1d(np.asarray(y1, dtype=complex))
    y2 = np.atleast_1d(np.asarray(y2, dtype=complex))

    def d(fn, k):
        args_p = [x, y1, y2]
        args_m = [x, y1, y2]
        args_p[k] = args_p[k] + h
        args_m[k] = args_m[k] - h
        p, m = fn(*args_p), fn(*args_m)
        return [(p[i] - m[i]) / (2 * h) for i in (0, 1)]

    dx, d1, d2 = d(psi, 0), d(psi, 1), d(psi, 2)
    v1, v2 = field_(x, y1, y2)
    lhs = [x * x * dx[i] + d1[i] * v1 + d2[i] * v2 for i in (0, 1)]
    rhs = field_(x, *psi(x, y1, y2))
    return float(max(np.max(np.abs(lhs[i] - rhs[i])) for i in (0, 1)))


# ---------------------------------------------------------------------------
# leaf-space coefficients


@dataclass(frozen=True)
class CircleSpec:
    """Contour for the Laurent extraction.

    ``radius`` is the size of the y-coordinate matching the Laurent
    variable on the contour (r + delta in the Cauchy estimate); the other
    coordinate then has size |w x^a| / radius, which must stay below
    ``other_radius``.
    """
    radius: float = 0.5
    other_radius: float = 0.5
    points: int = 64


def _leaf_values(psi: Isotropy, chart: LeafChart, x, w, circle: CircleSpec):
    side = _side_key(psi.side)
    xa = abs(chart.power(x, chart.a))
    if abs(w) * xa >= circle.radius * circle.other_radius:
        raise AnnulusEmpty(f"|w x^a| = {abs(w) * xa:.3g} leaves no room between the radii "
                           f"{circle.radius:g} and {circle.other_radius:g}")
    jv = 1 if side == "+" else 2
    rho = circle.radius / abs(f_eval(chart, jv, x, w))
    M = circle.points
    t = rho * np.exp(2j * np.pi * np.arange(M) / M)
    if side == "+":
        h1, h2 = t, w / t
    else:
        h1, h2 = w / t, t
    y1, y2 = leaf_param(chart, h1, h2, np.full(M, x))
    z1, z2 = psi(x, y1, y2)
    H1, H2, _ = first_integrals(chart, np.full(M, x), z1, z2)
    return t, rho, np.asarray(H1), np.asarray(H2)


def _laurent(values, rho, nmin, nmax):
    """Laurent coefficients n in [nmin, nmax] of samples on |h| = rho, with a
    spectral error estimate from the half-resolution rule."""
    M = len(values)
    F = np.fft.fft(values) / M
    G = np.fft.fft(values[::2]) / (M // 2)
    out, err = {}, {}
    for n in range(nmin, nmax + 1):
        v = F[n % M] / rho ** n
        out[n] = v
        err[n] = abs(G[n % (M // 2)] / rho ** n - v)
    return out, err


def extract_laurent(psi: Isotropy, chart: LeafChart, j: int, n: int, w, x,
                    circle: CircleSpec = CircleSpec()):
    """Psi_{j,side,n}(w) at one w from the isotropy sampled at x.

    Returns (value, error_estimate).  Any integer n is accepted, so the
    vanishing of coefficients outside the index range can be observed.
    """
    t, rho, H1, H2 = _leaf_values(psi, chart, complex(x), complex(w), circle)
    vals, errs = _laurent(H1 if j == 1 else H2, rho, n, n)
    return complex(vals[n]), float(errs[n])


@dataclass
class StokesData:
    side: str
    x: complex
    n_max: int
    w_order: int
    w_radius: float
    tables: dict
    errors: dict
    psi_w_tables: dict
    forced: dict
    below_range: float

    def value(self, j, n, w):
        """Psi_{j,side,n}(w) from the Taylor table."""
        c = self.tables[(j, n)]
        return complex(np.polyval(c[::-1], w))

    def leaf_map(self, h1, h2):
        """Reconstructed (Psi_1, Psi_2) at leaf coordinates (h1, h2)."""
        h1 = np.asarray(h1, dtype=complex)
        h2 = np.asarray(h2, dtype=complex)
        w = h1 * h2
        h = h1 if _side_key(self.side) == "+" else h2
        out = [h1.copy(), h2.copy()]
        for (j, n), c in self.tables.items():
            out[j - 1] = out[j - 1] + np.polyval(c[::-1], w) * h ** n
        return out[0], out[1]

    def to_dict(self):
        def enc(z):
            return [float(np.real(z)), float(np.imag(z))]
        return {
            "side": self.side,
            "x": enc(self.x),
            "n_max": self.n_max,
            "w_order": self.w_order,
            "w_radius": self.w_radius,
            "tables": {f"{j},{n}": [enc(c) for c in v] for (j, n), v in sorted(self.tables.items())},
            "errors": {f"{j},{n}": [float(e) for e in v] for (j, n), v in sorted(self.errors.items())},
            "psi_w_tables": {str(n): [enc(c) for c in v] for n, v in sorted(self.psi_w_tables.items())},
            "forced": {k: enc(v) for k, v in self.forced.items()},
            "below_range_max": self.below_range,
        }

    def rows(self):
        """CSV rows (side, j, n, k, re, im, err) of the Taylor tables."""
        for (j, n), v in sorted(self.tables.items()):
            for k, c in enumerate(v):
                yield (self.side, j, n, k, c.real, c.imag, float(self.errors[(j, n)][k]))


def compute_stokes_data(psi: Isotropy, chart: LeafChart, x, n_max=6, w_order=4,
                        w_radius=None, w_points=16, circle: CircleSpec = CircleSpec()):
    """Taylor tables of every Psi_{j,side,n}, n <= n_max, up to w^w_order."""
    x = complex(x)
    side = _side_key(psi.side)
    if n_max < 2:
        raise InsufficientRange("n_max must be at least 2")
    chart.check(x)
    xa = abs(chart.power(x, chart.a))
    if w_radius is None:
        w_radius = 0.5 * circle.radius * circle.other_radius / xa
    K = max(w_points, 2 * (w_order + 1))
    ws = w_radius * np.exp(2j * np.pi * np.arange(K) / K)
    lo = -n_max - 2
    L = {(j, n): np.zeros(K, dtype=complex) for j in (1, 2) for n in range(lo, n_max + 1)}
    Lerr = {key: 0.0 for key in L}
    Lw = {n: np.zeros(K, dtype=complex) for n in range(0, n_max + 1)}
    for k, w in enumerate(ws):
        t, rho, H1, H2 = _leaf_values(psi, chart, x, w, circle)
        for j, H in ((1, H1), (2, H2)):
            vals, errs = _laurent(H, rho, lo, n_max)
            for n in vals:
                L[(j, n)][k] = vals[n]
                Lerr[(j, n)] = max(Lerr[(j, n)], errs[n])
        vals, _ = _laurent(H1 * H2, rho, 0, n_max)
        for n in vals:
            Lw[n][k] = vals[n]

    def taylor(samples):
        F = np.fft.fft(samples) / K
        return np.array([F[m] / w_radius ** m for m in range(w_order + 1)])

    def taylor_err(samples, laurent_err):
        F = np.fft.fft(samples) / K
        # aliasing: the largest coefficient beyond the table stands in for the tail
        tail = max(abs(F[m]) for m in range(w_order + 1, K // 2 + 1))
        return np.array([(tail + laurent_err) / w_radius ** m for m in range(w_order + 1)])

    tables, errors = {}, {}
    for j in (1, 2):
        for n in range(first_index(j, side), n_max + 1):
            tables[(j, n)] = taylor(L[(j, n)])
            errors[(j, n)] = taylor_err(L[(j, n)], Lerr[(j, n)])
    psi_w = {n: taylor(Lw[n]) for n in range(1, n_max + 1)}

    # forced terms and coefficients outside the index range
    if side == "+":
        one, lin = (1, 1), (2, -1)
    else:
        one, lin = (2, 1), (1, -1)
    forced = {
        f"Psi_{one[0]},{one[1]}": complex(np.mean(L[one])),
        f"Psi_{lin[0]},{lin[1]}(0)": complex(taylor(L[lin])[0]),
        f"Psi_{lin[0]},{lin[1]}'(0)": complex(taylor(L[lin])[1]) if w_order >= 1 else 0j,
        "Psi_w,0(0)": complex(taylor(Lw[0])[0]),
    }
    below = 0.0
    for (j, n), v in L.items():
        if n >= first_index(j, side) or (j, n) in (one, lin):
            continue
        below = max(below, float(np.max(np.abs(v))))
    return StokesData("lambda" if side == "+" else "-lambda", x, n_max, w_order,
                      float(w_radius), tables, errors, psi_w, forced, below)


# ---------------------------------------------------------------------------
# synthetic isotropies


def leaf_isotropy(tables: dict, side: str):
    """Psi(h1, h2) = (h1, h2) + sum_n P_{j,n}(h1 h2) h^n from Taylor tables."""
    s = _side_key(side)
    tabs = {k: np.asarray(v, dtype=complex) for k, v in tables.items()}
    for (j, n) in tabs:
        if n < first_index(j, s):
            raise RejectedInput(f"index n={n} outside the range for j={j} on side {side}")

    def Psi(h1, h2):
        w = h1 * h2
        h = h1 if s == "+" else h2
        out = [np.array(h1, dtype=complex), np.array(h2, dtype=complex)]
        for (j, n), c in tabs.items():
            out[j - 1] = out[j - 1] + np.polyval(c[::-1], w) * h ** n
        return out[0], out[1]
    return Psi


def synthetic_isotropy(chart: LeafChart, tables: dict, side: str) -> Isotropy:
    """psi = H^{-1} o Psi o H for prescribed entire tables."""
    Psi = leaf_isotropy(tables, side)

    def psi(x, y1, y2):
        y1 = np.asarray(y1, dtype=complex)
        xs = np.full(y1.shape, x, dtype=complex)
        h1, h2, _ = first_integrals(chart, xs, y1, y2)
        g1, g2 = Psi(np.asarray(h1), np.asarray(h2))
        return leaf_param(chart, g1, g2, xs)
    return Isotropy(side, psi)


def perturbed_isotropy(base: Isotropy, delta):
    """base followed by an additive perturbation delta(x, y1, y2) -> (d1, d2)."""
    def psi(x, y1, y2):
        z1, z2 = base(x, y1, y2)
        d1, d2 = delta(x, y1, y2)
        return z1 + d1, z2 + d2
    return Isotropy(base.side, psi)


# ---------------------------------------------------------------------------
# reports


@dataclass
class FlatnessFit:
    A: float
    B: float | None
    power: float
    flat_to_machine: bool
    ok: bool
    points: int

    def to_dict(self):
        return {"A": self.A, "B": self.B, "power": self.power,
                "flat_to_machine": self.flat_to_machine, "ok": self.ok,
                "points": self.points}


def flatness_check(psi, rays, radii, y=(0.1, 0.1), floor=1e-13, min_B=1e-6) -> FlatnessFit:
    """Fit log|psi - Id| = log A - B/|x| + p log|x| over rays into the origin.

    The power term keeps polynomial deviations such as x^2 from passing as
    exponentially flat: for them the fitted B is zero.
    """
    if len(rays) < 2:
        raise RejectedInput("flatness_check needs at least two rays")
    y1 = np.atleast_1d(np.asarray(y[0], dtype=complex))
    y2 = np.atleast_1d(np.asarray(y[1], dtype=complex))
    scale = float(max(np.max(np.abs(y1)), np.max(np.abs(y2)), 1.0))
    rs, ds = [], []
    for phi in rays:
        for r in radii:
            x = r * cmath.exp(1j * phi)
            z1, z2 = psi(x, y1, y2)
            dev = float(max(np.max(np.abs(z1 - y1)), np.max(np.abs(z2 - y2))))
            if dev > floor * scale:
                rs.append(r)
                ds.append(dev)
    if len(rs) < 4:
        return FlatnessFit(0.0, None, 0.0, True, True, len(rs))
    rs = np.array(rs)
    X = np.column_stack([np.ones_like(rs), -1.0 / rs, np.log(rs)])
    coef, *_ = np.linalg.lstsq(X, np.log(ds), rcond=None)
    logA, B, p = coef
    return FlatnessFit(float(math.exp(logA)), float(B), float(p), False, bool(B > min_B), len(rs))


@dataclass
class ModuliReport:
    center_variety_convergent: bool
    H1_convergent: bool
    H2_convergent: bool
    martinet_ramis_affine_part: complex | None
    martinet_ramis_diffeo: list
    symplectic: bool
    det_deviation: float
    psi2_lam_0_0: complex
    psi1_mlam_0_0: complex

    def to_dict(self):
        def enc(z):
            return None if z is None else [z.real, z.imag]
        return {
            "center_variety_convergent": self.center_variety_convergent,
            "H1_convergent": self.H1_convergent,
            "H2_convergent": self.H2_convergent,
            "martinet_ramis_affine_part": enc(self.martinet_ramis_affine_part),
            "martinet_ramis_diffeo": [enc(z) for z in self.martinet_ramis_diffeo],
            "symplectic": self.symplectic,
            "det_deviation": self.det_deviation,
            "Psi_2,lambda,0(0)": enc(self.psi2_lam_0_0),
            "Psi_1,-lambda,0(0)": enc(self.psi1_mlam_0_0),
        }


def _det_deviation(data: StokesData, radius=0.2, n=5, h=1e-5):
    g = radius * np.exp(2j * np.pi * np.arange(n) / n)
    h1, h2 = np.meshgrid(g, 0.7 * g * np.exp(0.3j))
    h1, h2 = h1.ravel(), h2.ravel()
    p1, p2 = data.leaf_map(h1 + h, h2)
    m1, m2 = data.leaf_map(h1 - h, h2)
    q1, q2 = data.leaf_map(h1, h2 + h)
    r1, r2 = data.leaf_map(h1, h2 - h)
    a, c = (p1 - m1) / (2 * h), (p2 - m2) / (2 * h)
    b, d = (q1 - r1) / (2 * h), (q2 - r2) / (2 * h)
    return float(np.max(np.abs(a * d - b * c - 1)))


def moduli_report(data_plus: StokesData, data_minus: StokesData, tol=1e-8,
                  det_tol=1e-6) -> ModuliReport:
    """Invariant varieties, Martinet-Ramis part and symplecticity from the tables."""
    if data_plus.n_max < 2 or data_minus.n_max < 2:
        raise InsufficientRange("moduli_report needs n_max >= 2")
    if _side_key(data_plus.side) != "+" or _side_key(data_minus.side) != "-":
        raise RejectedInput("expected the lambda-side data first, then the -lambda side")
    p20 = complex(data_plus.tables[(2, 0)][0])
    m10 = complex(data_minus.tables[(1, 0)][0])
    centre = abs(p20) <= tol and abs(m10) <= tol
    H1 = all(abs(data_minus.tables[(1, n)][0]) <= tol for n in range(0, data_minus.n_max + 1))
    H2 = all(abs(data_plus.tables[(2, n)][0]) <= tol for n in range(0, data_plus.n_max + 1))
    affine = p20 if H1 else None
    mr = [complex(data_minus.tables[(2, n)][0]) for n in range(2, data_minus.n_max + 1)] if H1 else []
    dev = max(_det_deviation(data_plus), _det_deviation(data_minus))
    return ModuliReport(centre, H1, H2, affine, mr, dev <= det_tol, dev, p20, m10)


def growth_constant(data: StokesData, chart: LeafChart, xs, r=(0.5, 0.5), delta=0.05):
    """Smallest C making the sampled coefficients obey the Cauchy-type bounds.

    The bound for side lam, j = 1 is |Psi_n(w)| < C |f1|^(n-1) / (r1 + delta)^n;
    the other three cases follow the same pattern.  Only w with
    |w x^a| <= r1 r2 are used.
    """
    side = _side_key(data.side)
    C = 0.0
    for x in xs:
        xa = abs(chart.power(x, chart.a))
        wmax = r[0] * r[1] / xa
        for w in wmax * np.array([0, 0.3, 0.6, 0.9]) * np.exp(0.7j):
            f1 = abs(f_eval(chart, 1, x, w))
            f2 = abs(f_eval(chart, 2, x, w))
            for (j, n), _ in data.tables.items():
                val = abs(data.value(j, n, w))
                if side == "+":
                    if j == 1:
                        bound = f1 ** (n - 1) / (r[0] + delta) ** n
                    else:
                        bound = f1 ** (n + 1) / (r[0] + delta) ** n / xa
                else:
                    if j == 1:
                        bound = f2 ** (n + 1) / (r[1] + delta) ** n / xa
                    else:
                        bound = f2 ** (n - 1) / (r[1] + delta) ** n
                C = max(C, val / bound)
    return C


# ---------------------------------------------------------------------------
# end to end


@dataclass
class StokesRun:
    nf: NormalForm
    phi: FiberedDiffeo
    plus: SectorialNormalization
    minus: SectorialNormalization
    data: dict
    report: ModuliReport


def default_points(lam, x_abs=1.0):
    t = cmath.phase(complex(lam))
    return {"lambda": x_abs * cmath.exp(1j * t), "-lambda": x_abs * cmath.exp(1j * (t + math.pi))}


def stokes_pipeline(Y: DiagSaddleNode, N: int, n_max=6, w_order=4, x_abs=1.0,
                    circle: CircleSpec = CircleSpec(), tol=1e-8, pade=None,
                    epsilon=0.3, normalized=None, threads=1):
    """Normalize, sum on both wide sectors, form both Stokes isotropies and tabulate them.

    With ``threads > 1`` the two narrow sides are tabulated concurrently.
    """
    from .normalizer import normalize_div_integrable
    if normalized is None:
        phi, nf = normalize_div_integrable(Y, N)
    else:
        phi, nf = normalized
    lam = complex(nf.to_mode(FLOAT).lam)
    pts = default_points(lam, x_abs)
    plus = sectorial_normalization(Y, phi, "plus", pade=pade)
    minus = sectorial_normalization(Y, phi, "minus", pade=pade)

    def one_side(side):
        chart = LeafChart(nf, sector_for(lam, side, radius=2 * x_abs, epsilon=epsilon))
        iso = stokes_diffeo(plus, minus, side, [pts[side]])
        return compute_stokes_data(iso, chart, pts[side], n_max, w_order, circle=circle)

    if threads > 1:
        # force the lazy sums once so the workers only read them
        plus.at(pts["lambda"]), minus.at(pts["lambda"])
        plus.at(pts["-lambda"]), minus.at(pts["-lambda"])
        with ThreadPoolExecutor(max_workers=min(threads, 2)) as pool:
            data = dict(zip(NARROW, pool.map(one_side, NARROW)))
    else:
        data = {side: one_side(side) for side in NARROW}
    report = moduli_report(data["lambda"], data["-lambda"], tol)
    return StokesRun(nf, phi, plus, minus, data, report)
