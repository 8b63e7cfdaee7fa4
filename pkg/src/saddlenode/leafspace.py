"""Sectors, first integrals and leaf coordinates of a div-integrable normal form.

For the normal form with c1 = -c, c2 = c, a = a1 + a2, v = y1*y2 and
m = 1/a, the functions::

    h1 = y1 * exp(-lam/x + c_m v^m log(x)/x + ct(v)/x) * x^(-a1)
    h2 = y2 * exp( lam/x - c_m v^m log(x)/x - ct(v)/x) * x^(-a2)
    w  = v / x^a

are first integrals, with ct_k = m c_k / (k - m).  Leaves are parametrized
by y_j = h_j f_j(x, h1 h2) where f1 f2 = x^a.

Every evaluation works on scalars or numpy arrays.  Logarithms use a cut
along the ray opposite the sector bisector.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import OverflowGuard, RejectedInput, XOutsideSector
from .normalizer import NormalForm
from .pscore import FLOAT

EXP_LIMIT = 700.0
SIDES = ("lambda", "-lambda", "plus", "minus")


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


@dataclass(frozen=True)
class SectorSpec:
    theta: float
    opening: float
    radius: float
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 < self.opening <= 2 * math.pi:
            raise RejectedInput("sector opening must lie in (0, 2*pi]")
        if self.radius <= 0 or self.epsilon < 0:
            raise RejectedInput("sector radius must be positive and epsilon nonnegative")

    @property
    def half_width(self):
        return self.opening / 2 + self.epsilon

    def contains(self, x):
        x = np.asarray(x, dtype=complex)
        ok = (np.abs(x) > 0) & (np.abs(x) < self.radius)
        if self.half_width < math.pi:
            ok &= np.abs(_wrap(np.angle(x) - self.theta)) < self.half_width
        return ok


def sector_for(lam, side: str, radius=1.0, epsilon=0.1) -> SectorSpec:
    """Standard sectors attached to lam.

    ``plus``/``minus`` are the wide sectors around arg(i lam), arg(-i lam) of
    opening pi (widened by epsilon); ``lambda``/``-lambda`` are the narrow
    overlaps around arg(lam), arg(-lam) of half-width epsilon.
    """
    t = cmath.phase(complex(lam))
    if side == "plus":
        return SectorSpec(t + math.pi / 2, math.pi, radius, epsilon)
    if side == "minus":
        return SectorSpec(t - math.pi / 2, math.pi, radius, epsilon)
    if side == "lambda":
        return SectorSpec(t, 2 * epsilon, radius, 0.0)
    if side == "-lambda":
        return SectorSpec(t + math.pi, 2 * epsilon, radius, 0.0)
    raise RejectedInput(f"unknown side {side!r}; expected one of {SIDES}")


class LeafChart:
    """Evaluators for h1, h2, w, f1, f2 on one sector with one log branch."""

    def __init__(self, nf: NormalForm, sector: SectorSpec, log_branch=None, tol=1e-12):
        if not nf.is_div_integrable(tol):
            raise RejectedInput("leaf charts need a div-integrable normal form (c1 + c2 = 0)")
        if nf.m_value is None:
            raise RejectedInput("leaf charts need a nonzero residue")
        self.nf = nf
        self.sector = sector
        self.log_branch = sector.theta + math.pi if log_branch is None else float(log_branch)
        f = nf.to_mode(FLOAT)
        self.lam = complex(f.lam)
        self.a1 = complex(f.a1)
        self.a2 = complex(f.a2)
        self.a = self.a1 + self.a2
        self.m = nf.m
        self.c_m = complex(f.c_m)
        ct = f.c_tilde.complex_coeffs()
        self._ct_rev = np.array(ct[::-1], dtype=complex)
        self.ct_order = len(ct) - 1

    def log(self, x):
        x = np.asarray(x, dtype=complex)
        centre = self.log_branch - math.pi
        return np.log(np.abs(x)) + 1j * (centre + _wrap(np.angle(x) - centre))

    def power(self, x, p):
        return np.exp(p * self.log(x))

    def check(self, x):
        if not np.all(self.sector.contains(x)):
            raise XOutsideSector(f"x outside the sector (theta={self.sector.theta:.6g}, "
                                 f"half-width={self.sector.half_width:.6g}, "
                                 f"radius={self.sector.radius:.6g})")

    def c_tilde(self, v):
        return np.polyval(self._ct_rev, v)

    def _wm(self, w):
        if self.m is None or self.c_m == 0:
            return 0
        return self.c_m * w ** self.m

    def _exponent(self, x, w):
        """lam/x - c_m w^m log x - ct(w x^a)/x, the exponent of f1 without x^a1."""
        x = np.asarray(x, dtype=complex)
        return self.lam / x - self._wm(w) * self.log(x) - self.c_tilde(w * self.power(x, self.a)) / x

    def truncation_bound(self, x, w):
        """Size of the last kept term of ct(w x^a)/x, a proxy for the tail of ct."""
        v = np.abs(w * self.power(x, self.a))
        if self.ct_order < 1:
            return np.zeros_like(v, dtype=float)
        return np.abs(self._ct_rev[0]) * v ** self.ct_order / np.abs(x)


def _guarded_exp(z):
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z.real) > EXP_LIMIT):
        raise OverflowGuard(f"exponent with real part {np.max(np.abs(z.real)):.4g} exceeds {EXP_LIMIT}")
    return np.exp(z)


def _out(v):
    v = np.asarray(v)
    return complex(v) if v.ndim == 0 else v


def first_integrals(chart: LeafChart, x, y1, y2):
    chart.check(x)
    x = np.asarray(x, dtype=complex)
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    w = y1 * y2 / chart.power(x, chart.a)
    e = chart._exponent(x, w)
    h1 = y1 * _guarded_exp(-e) * chart.power(x, -chart.a1)
    h2 = y2 * _guarded_exp(e) * chart.power(x, -chart.a2)
    return _out(h1), _out(h2), _out(w)


def f_eval(chart: LeafChart, j: int, x, w):
    chart.check(x)
    e = chart._exponent(x, np.asarray(w, dtype=complex))
    if j == 1:
        return _out(_guarded_exp(e) * chart.power(x, chart.a1))
    if j == 2:
        return _out(_guarded_exp(-e) * chart.power(x, chart.a2))
    raise RejectedInput("j must be 1 or 2")


def leaf_param(chart: LeafChart, h1, h2, x):
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    w = h1 * h2
    return (_out(h1 * f_eval(chart, 1, x, w)), _out(h2 * f_eval(chart, 2, x, w)))


@dataclass
class LimitReport:
    j: int
    ray: float
    expected: str
    observed: str
    ok: bool
    log_abs: list = field(default_factory=list)

    def to_dict(self):
        return {"j": self.j, "ray": self.ray, "expected": self.expected,
                "observed": self.observed, "ok": self.ok}


def expected_limit(lam, j: int, ray: float) -> str:
    """Behaviour of |f_j| as x -> 0 along arg x = ray: 'infinity' or 'zero'."""
    s = math.cos(ray - cmath.phase(complex(lam)))
    if abs(s) < 1e-12:
        return "bounded"
    grows = s > 0
    if j == 2:
        grows = not grows
    return "infinity" if grows else "zero"


def limit_check(chart: LeafChart, j: int, w, ray: float, r_min=None, samples=40) -> LimitReport:
    """Sample log|f_j| along x = r e^{i ray} with r decreasing to ``r_min``."""
    r_max = 0.9 * chart.sector.radius
    if r_min is None:
        # stay clear of the overflow guard
        r_min = max(1.5 * abs(chart.lam) / EXP_LIMIT, r_max / 200)
    rs = np.geomspace(r_max, r_min, samples)
    xs = rs * np.exp(1j * ray)
    vals = np.log(np.abs(np.asarray(f_eval(chart, j, xs, np.full(samples, complex(w))))))
    diffs = np.diff(vals)
    tail = diffs[samples // 2:]
    if np.all(tail > 0):
        observed = "infinity"
    elif np.all(tail < 0):
        observed = "zero"
    else:
        observed = "bounded"
    exp = expected_limit(chart.lam, j, ray)
    return LimitReport(j, ray, exp, observed, exp == observed, list(vals))


@dataclass(frozen=True)
class LeafDomain:
    chart: LeafChart
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 <= 0 or self.r2 <= 0:
            raise RejectedInput("leaf-domain radii must be positive")


def in_leaf_domain(dom: LeafDomain, x, h1, h2):
    h1 = np.asarray(h1, dtype=complex)
    h2 = np.asarray(h2, dtype=complex)
    w = h1 * h2
    f1 = np.abs(f_eval(dom.chart, 1, x, w))
    f2 = np.abs(f_eval(dom.chart, 2, x, w))
    ok = (np.abs(h1) * f1 <= dom.r1) & (np.abs(h2) * f2 <= dom.r2)
    return bool(ok) if np.ndim(ok) == 0 else ok


def normal_form_rhs(nf: NormalForm):
    """Right-hand side of the normal form flow in the time t with x' = x^2."""
    f = nf.to_mode(FLOAT)
    lam, a1, a2 = complex(f.lam), complex(f.a1), complex(f.a2)
    c1 = np.array(f.c1.complex_coeffs()[::-1], dtype=complex)
    c2 = np.array(f.c2.complex_coeffs()[::-1], dtype=complex)

    def rhs(t, z):
        x, y1, y2 = z
        v = y1 * y2
        return [x * x,
                (-lam + a1 * x + np.polyval(c1, v)) * y1,
                (lam + a2 * x + np.polyval(c2, v)) * y2]
    return rhs


def integrate_normal_form(nf: NormalForm, x0, y1, y2, t_end=1.0, samples=11, rtol=1e-13):
    """Trajectory of the normal-form flow, as arrays (t, x, y1, y2)."""
    ts = np.linspace(0.0, t_end, samples)
    sol = solve_ivp(normal_form_rhs(nf), (0.0, t_end),
                    np.array([x0, y1, y2], dtype=complex), method="DOP853",
                    t_eval=ts, rtol=rtol, atol=1e-15)
    if not sol.success:
        raise RejectedInput(f"integration failed: {sol.message}")
    return sol.t, sol.y[0], sol.y[1], sol.y[2]
