"""Borel-Pade-Laplace summation of Gevrey-1 series in x.

Conventions
-----------
Borel transform::

    B(sum_{k>=1} f_k x^k)(zeta) = sum_{k>=0} f_{k+1} zeta^k / k!

so that the Laplace integral ``int_0^{inf e^{i theta}} B(zeta) exp(-zeta/x) dzeta``
gives back ``f - f_0`` termwise.  The Borel series is continued by a robust
Pade approximant (SVD based, so exactly rational data yields the exact
rational function) and integrated along a ray with adaptive Gauss-Legendre
panels.

The lateral jump at a direction ``theta`` is ``S(theta + eps) - S(theta - eps)``.
For ``B = 1/(1 - zeta)`` at ``theta = 0`` it equals ``2*pi*i*exp(-1/x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import toeplitz

from .errors import PoleOnRay, QuadratureFailure, RejectedInput
from .pscore import EXACT, FLOAT, UniSeries, to_complex, to_exact

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(20)
DEFAULT_TUBE = 1e-3
DEFAULT_EPS = 0.05
CUTOFF = 1e-18


@dataclass(frozen=True)
class BorelSeries:
    coeffs: UniSeries
    source_order: int
    f0: complex = 0j

    def complex_coeffs(self):
        return np.array(self.coeffs.complex_coeffs(), dtype=complex)


@dataclass
class SumResult:
    value: complex
    error_estimate: float
    theta: float
    theta_used: float
    poles: list = field(default_factory=list)


@dataclass
class DirectionalSum:
    theta: float
    samples: list
    quadrature_error_estimate: float


@dataclass
class GevreyCertificate:
    A: float
    C: float
    fit_residual: float
    is_gevrey1: bool
    A_fit: float = 0.0

    def to_dict(self):
        return {"A": self.A, "C": self.C, "fit_residual": self.fit_residual,
                "gevrey1": self.is_gevrey1}


def borel_transform(f: UniSeries) -> BorelSeries:
    """Coefficient k of the result is f_{k+1}/k!.  The constant f_0 is kept aside."""
    n = f.trunc
    out = []
    fact = 1
    for k in range(n):
        if k:
            fact *= k
        c = f[k + 1]
        out.append(c / (to_exact(fact) if f.mode == EXACT else fact))
    coeffs = UniSeries(out, max(n - 1, 0), f.mode) if out else UniSeries([], 0, f.mode)
    return BorelSeries(coeffs, n, to_complex(f[0]))


def series_from_complex(values, mode=FLOAT) -> UniSeries:
    return UniSeries(list(values), max(len(values) - 1, 0), mode)


# ---------------------------------------------------------------------------
# Pade


def robust_pade(c, L, M, tol=1e-14):
    """Pade approximant [L/M] of the coefficient vector ``c``.

    Follows the SVD-based algorithm of Gonnet, Guettel and Trefethen:
    degrees are reduced until the Toeplitz block has full rank, so that
    spurious pole/zero pairs are removed.  Returns ascending coefficient
    arrays ``(p, q)`` with ``q[0] = 1``.
    """
    c = np.asarray(c, dtype=complex)
    need = L + M + 1
    if len(c) < need:
        c = np.concatenate([c, np.zeros(need - len(c), dtype=complex)])
    c = c[:need]
    nrm = np.linalg.norm(c)
    if nrm == 0 or np.max(np.abs(c[: L + 1])) <= tol * np.max(np.abs(c)):
        return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    ts = tol * nrm
    m, n = L, M
    row = np.zeros(n + 1, dtype=complex)
    row[0] = c[0]
    while True:
        if n == 0:
            p = c[: m + 1].copy()
            q = np.ones(1, dtype=complex)
            break
        Z = toeplitz(c[: m + n + 1], row[: n + 1])
        C = Z[m + 1: m + n + 1, :]
        s = np.linalg.svd(C, compute_uv=False)
        rho = int(np.sum(s > ts))
        if rho == n:
            _, _, vh = np.linalg.svd(C)
            b = vh.conj().T[:, n]
            D = np.abs(b) + np.sqrt(np.finfo(float).eps)
            Q, _ = np.linalg.qr((C * D).T, mode="complete")
            b = D * Q[:, n]
            b = b / np.linalg.norm(b)
            p = Z[: m + 1, : n + 1] @ b
            q = b
            first = np.argmax(np.abs(q) > tol)
            q = q[first:]
            p = p[first:]
            last = len(q) - np.argmax(np.abs(q[::-1]) > tol)
            q = q[:last]
            break
        m -= n - rho
        n = rho
        if m < 0:
            return np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    nz = np.nonzero(np.abs(p) > ts)[0]
    p = p[: nz[-1] + 1] if len(nz) else np.zeros(1, dtype=complex)
    p = p / q[0]
    q = q / q[0]
    return p, q


def default_pade(n_coeffs):
    k = max((n_coeffs - 1) // 2, 0)
    return k, k


@dataclass
class _Rational:
    p: np.ndarray
    q: np.ndarray
    poles: np.ndarray
    residues: np.ndarray

    def __call__(self, z):
        return np.polyval(self.p[::-1], z) / np.polyval(self.q[::-1], z)


MIN_PADE_TERMS = 4
ENTIRE_SLOPE = -0.5
POLE_STABILITY = 1e-2


def _looks_entire(c, big):
    """True when the nonzero Borel coefficients decay like 1/k!.

    Fits log|c_k| = alpha + beta k + gamma log k! over the nonzero entries.
    A convergent series in x has gamma near -1 and an entire Borel
    transform, whose Pade approximants only carry spurious poles.
    """
    k = big.astype(float)
    A = np.column_stack([np.ones_like(k), k, [math.lgamma(v + 1) for v in k]])
    coef, *_ = np.linalg.lstsq(A, np.log(np.abs(c[big])), rcond=None)
    return coef[2] < ENTIRE_SLOPE


def _terminating(c, tol=1e-13):
    """Length of ``c`` to sum as a polynomial, or None to use Pade.

    Polynomial treatment applies when the last max(2, n//4) coefficients
    vanish, when fewer than MIN_PADE_TERMS coefficients are nonzero, or
    when the coefficients decay factorially (entire Borel transform).
    Pade would otherwise invent poles.
    """
    n = len(c)
    scale = float(np.max(np.abs(c), initial=0.0))
    if scale == 0:
        return 1
    big = np.nonzero(np.abs(c) > tol * scale)[0]
    last = int(big[-1]) + 1
    if n <= 2 or n - last >= max(2, n // 4) or len(big) < MIN_PADE_TERMS:
        return last
    if _looks_entire(c, big):
        return last
    return None


def _pade_rational(c, L, M, tol):
    p, q = robust_pade(c, L, M, tol)
    if len(q) > 1:
        poles = np.roots(q[::-1])
        dq = np.polynomial.polynomial.polyder(q)
        residues = np.array([np.polyval(p[::-1], z) / np.polyval(dq[::-1], z) for z in poles])
    else:
        poles = np.zeros(0, dtype=complex)
        residues = np.zeros(0, dtype=complex)
    return _Rational(p, q, poles, residues)


def _confirmed(poles, other, rel=POLE_STABILITY):
    """Poles that the lower-order approximant reproduces."""
    return [p for p in poles if len(other) and np.min(np.abs(other - p)) <= rel * max(1.0, abs(p))]


def _polynomial(c, n):
    return _Rational(c[:n].copy(), np.ones(1, dtype=complex),
                     np.zeros(0, dtype=complex), np.zeros(0, dtype=complex))


@lru_cache(maxsize=512)
def _rational(b: BorelSeries, pade=None, tol=1e-14):
    c = b.complex_coeffs()
    if len(c) == 0:
        c = np.zeros(1, dtype=complex)
    if pade is not None:
        return _pade_rational(c, *pade, tol)
    short = _terminating(c)
    if short is not None:
        return _polynomial(c, short)
    L, M = default_pade(len(c))
    rat = _pade_rational(c, L, M, tol)
    scale = float(np.max(np.abs(c)))
    poles = _significant_poles(rat, scale)
    if len(poles) and M >= 2:
        lower = _significant_poles(_pade_rational(c[:-2], L - 1, M - 1, tol), scale)
        if not _confirmed(poles, lower):
            # every pole moves with the order: Pade noise on an entire function
            return _polynomial(c, len(c))
    return rat


def _significant_poles(rat, scale, tol=1e-12):
    keep = np.abs(rat.residues) > tol * max(scale, 1e-300)
    return rat.poles[keep]


def _wrap(a):
    return (a + math.pi) % (2 * math.pi) - math.pi


def _check_ray(poles, theta, tube):
    u = complex(math.cos(theta), math.sin(theta))
    for p in poles:
        t = (p * u.conjugate()).real
        dist = abs(p) if t < 0 else abs(p - t * u)
        if t >= 0 and dist <= tube * max(1.0, abs(p)):
            raise PoleOnRay(f"Pade pole {complex(p):.6g} lies on the ray arg = {theta:.6g}",
                            pole=complex(p))


def _pick_direction(poles, theta, x, margin=0.35):
    """Integration ray: as close to arg(x) as the pole-free arc around theta allows."""
    rel = sorted(_wrap(math.atan2(p.imag, p.real) - theta) for p in poles if p != 0)
    if rel:
        pos = [r for r in rel if r > 0]
        neg = [r for r in rel if r < 0]
        hi = min(pos) if pos else min(rel) + 2 * math.pi
        lo = max(neg) if neg else max(rel) - 2 * math.pi
        mu = min(margin, (hi - lo) / 4)
        lo, hi = lo + mu, hi - mu
    else:
        lo, hi = -math.inf, math.inf
    target = _wrap(math.atan2(x.imag, x.real) - theta)
    return theta + min(max(target, lo), hi)


def _gl(g, a, b):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    t = mid + half * GL_NODES
    return half * np.dot(GL_WEIGHTS, g(t))


def _adaptive(g, a, b, tol, depth=0):
    whole = _gl(g, a, b)
    m = 0.5 * (a + b)
    left, right = _gl(g, a, m), _gl(g, m, b)
    err = abs(left + right - whole)
    if err <= tol or depth >= 30:
        if err > tol and depth >= 30:
            raise QuadratureFailure("adaptive Gauss-Legendre did not converge")
        return left + right, err
    v1, e1 = _adaptive(g, a, m, tol / 2, depth + 1)
    v2, e2 = _adaptive(g, m, b, tol / 2, depth + 1)
    return v1 + v2, e1 + e2


def _ray_integral(rat, theta, x, rtol=1e-14, max_panels=4000):
    u = complex(math.cos(theta), math.sin(theta))
    kappa = (u / x).real
    if kappa <= 0:
        raise RejectedInput(f"x = {x} is outside the half-plane of direction {theta:.6g}")
    r_near = min((abs(p) for p in rat.poles), default=math.inf)
    h = min(1.0 / kappa, max(r_near, 1e-3 / kappa))

    def g(t):
        z = t * u
        return rat(z) * np.exp(-z / x) * u

    total = 0j
    err = 0.0
    peak = 0.0
    a = 0.0
    for _ in range(max_panels):
        b = a + h
        probe = np.abs(g(np.linspace(a, b, 9)))
        pmax = float(np.max(probe))
        if not np.isfinite(pmax):
            raise QuadratureFailure("integrand not finite on the ray")
        peak = max(peak, pmax)
        tol = max(rtol * max(abs(total), peak * h), 1e-300)
        v, e = _adaptive(g, a, b, tol)
        total += v
        err += e
        # polynomial growth is eventually beaten by the exponential
        if pmax < CUTOFF * peak and kappa * b > 40:
            return total, err
        a = b
        h = min(h * 1.5, 8.0 / kappa)
    raise QuadratureFailure("integrand did not decay along the ray")


def laplace_sum_detailed(b: BorelSeries, theta: float, x: complex, pade=None,
                         tube=DEFAULT_TUBE, rtol=1e-14) -> SumResult:
    """1-sum in direction ``theta`` evaluated at ``x``.

    Integration follows ``theta`` itself when possible.  Points ``x`` that
    are not deep inside the half-plane of ``theta`` are reached by turning
    the ray towards ``arg x`` inside the pole-free arc around ``theta``,
    which analytically continues the same sum.
    """
    x = complex(x)
    if x == 0:
        raise RejectedInput("x must be nonzero")
    rat = _rational(b, None if pade is None else tuple(pade))
    scale = float(np.max(np.abs(b.complex_coeffs()), initial=0.0))
    poles = _significant_poles(rat, scale)
    _check_ray(poles, theta, tube)
    used = _pick_direction(poles, theta, x)
    if math.cos(_wrap(math.atan2(x.imag, x.real) - used)) <= 1e-3:
        raise RejectedInput(f"x = {x} cannot be reached from direction {theta:.6g} "
                            f"without crossing a singular direction")
    if len(rat.q) == 1:
        # int_0^inf zeta^k e^{-zeta/x} d zeta = k! x^{k+1}, in any admissible direction
        val = sum(complex(pk) * math.factorial(k) * x ** (k + 1) for k, pk in enumerate(rat.p))
        err = 0.0
    else:
        val, err = _ray_integral(rat, used, x, rtol)
    return SumResult(val + b.f0, err, theta, used, [complex(p) for p in poles])


def laplace_sum(b: BorelSeries, theta: float, x: complex, pade=None,
                tube=DEFAULT_TUBE) -> complex:
    return laplace_sum_detailed(b, theta, x, pade, tube).value


def directional_sum(b: BorelSeries, theta: float, xs, pade=None,
                    tube=DEFAULT_TUBE) -> DirectionalSum:
    samples = []
    err = 0.0
    for x in xs:
        r = laplace_sum_detailed(b, theta, x, pade, tube)
        samples.append((complex(x), r.value))
        err = max(err, r.error_estimate)
    return DirectionalSum(theta, samples, err)


def lateral_jump(b: BorelSeries, theta: float, eps: float = DEFAULT_EPS,
                 x: complex = 0.1, pade=None, tube=DEFAULT_TUBE) -> complex:
    """Sum from ``theta + eps`` minus sum from ``theta - eps``."""
    return (laplace_sum(b, theta + eps, x, pade, tube)
            - laplace_sum(b, theta - eps, x, pade, tube))


def singular_directions(b: BorelSeries, pade=None):
    """Arguments of the significant Pade poles, i.e. candidate Stokes rays."""
    rat = _rational(b, None if pade is None else tuple(pade))
    scale = float(np.max(np.abs(b.complex_coeffs()), initial=0.0))
    return sorted(math.atan2(p.imag, p.real) for p in _significant_poles(rat, scale))


# ---------------------------------------------------------------------------
# Gevrey growth


def gevrey_fit(coeffs, max_residual=0.5) -> GevreyCertificate:
    """Fit log|f_k| - log k! = k log C + log A by least squares.

    ``A`` is inflated so that |f_k| <= A C^k k! holds for every supplied
    nonzero coefficient.  A fit residual above ``max_residual`` (root mean
    square, natural log units) flags the sequence as not Gevrey-1.
    """
    vals = [complex(to_complex(c)) for c in coeffs]
    if len(vals) < 6:
        raise RejectedInput("gevrey_fit needs at least 6 coefficients")
    ks, ys = [], []
    for k, v in enumerate(vals):
        if abs(v) > 0:
            ks.append(k)
            ys.append(math.log(abs(v)) - math.lgamma(k + 1))
    if len(ks) < 2:
        return GevreyCertificate(max((abs(v) for v in vals), default=0.0) or 1.0,
                                 1.0, 0.0, True)
    ks = np.array(ks, dtype=float)
    ys = np.array(ys)
    slope, intercept = np.polyfit(ks, ys, 1)
    dev = ys - (slope * ks + intercept)
    resid = float(np.sqrt(np.mean(dev ** 2)))
    A = math.exp(intercept + max(0.0, float(np.max(dev))))
    return GevreyCertificate(A, math.exp(slope), resid, resid <= max_residual,
                             A_fit=math.exp(intercept))
