"""The kernel Gamma(s, s') = int exp(-(2t - s - s')|xi|^2 / 2) mu(d xi) and its derivatives.

All quantities reduce to the moments

    G_k(a) = int (|xi|^2 / 2)^k exp(-a |xi|^2 / 2) mu(d xi),   a = 2t - s - s',

since d/ds and d/ds' each bring down a factor |xi|^2 / 2.  Homogeneous
measures (white, Riesz, fractional product) have G_k(a) in closed form;
other radial measures use a trapezoid rule in log r after the substitution
r' = r sqrt(a), which keeps the integrand O(1) however small a is.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import gammaln

from . import spectral
from .quadrature import gl_panels
from .spectral import SpectralMeasure

ORDERS = {"Ds": 1, "DsDsp": 2, "D2sDsp": 3}
CORNER_MIN = 1e-12


def _homogeneous_moment(m: SpectralMeasure, k: int, a: np.ndarray) -> np.ndarray:
    # A C 2^{-k} int r^{2k+p+d-1} e^{-a r^2/2} dr = A C 2^{-k} (1/2) (2/a)^{c} Gamma(c), c = (2k+p+d)/2
    c = 0.5 * (2 * k + m.degree + m.dim)
    if c <= 0:
        return np.full(np.shape(a), np.inf)
    A = spectral.angular_constant(m)
    C = m.scale * (2 * np.pi) ** (-m.dim) if m.kind == spectral.WHITE else 1.0
    logpref = math.log(A * C) if A * C > 0 else -math.inf
    logc = logpref - k * math.log(2.0) - math.log(2.0) + c * math.log(2.0) + gammaln(c)
    with np.errstate(divide="ignore"):
        return np.exp(logc - c * np.log(a))


def _trapezoid_moment(m: SpectralMeasure, k: int, a: np.ndarray, rtol: float) -> np.ndarray:
    """G_k(a) for a radial profile, vectorized over a > 0."""
    d = m.dim
    A = spectral.angular_constant(m)
    om = m.origin_exponent or 0.0
    e = 2 * k + d
    if e - om <= 0:
        return np.full(a.shape, np.inf)
    out = np.empty(a.shape)
    # x = log r'; integrand e^{x e - e^{2x}/2} rho(e^x / sqrt(a)), the profile
    # behaving like r^{-om} at worst near 0, so the lower limit shifts with a
    x_hi = math.log(14.0)
    for sl in _chunks(a.size, 4096):
        aa = a.ravel()[sl][:, None]
        x_lo = min(0.5 * math.log(float(aa.min())), 0.0) - 40.0 / (e - om)
        h = 0.125
        prev = None
        xs = np.arange(x_lo, x_hi + h, h)
        total = _trap_sum(m, xs, aa, e) * h
        while True:
            h *= 0.5
            mids = xs[:-1] + h
            total_new = 0.5 * total + _trap_sum(m, mids, aa, e) * h
            xs = np.sort(np.concatenate([xs, mids]))
            if prev is not None and np.all(np.abs(total_new - total) <= rtol * np.abs(total_new)):
                total = total_new
                break
            if h < 1e-4:
                total = total_new
                break
            prev, total = total, total_new
        out.ravel()[sl] = (A * 2.0**-k * aa[:, 0] ** (-0.5 * e) * total[:, 0] if total.ndim == 2
                           else A * 2.0**-k * aa[:, 0] ** (-0.5 * e) * total)
    return out


def _trap_sum(m, xs, aa, e):
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        base = np.exp(xs * e - 0.5 * np.exp(2.0 * xs))
        vals = base[None, :] * spectral.radial_profile(m, np.exp(xs)[None, :] / np.sqrt(aa))
    vals = np.where(np.isfinite(vals), vals, 0.0)
    return vals.sum(axis=1)


def _support_moment(m: SpectralMeasure, k: int, a: np.ndarray) -> np.ndarray:
    """Compact support: composite Gauss-Legendre on [0, support_radius]."""
    Rs = m.support_radius
    br = np.concatenate([[0.0], Rs * 0.5 ** np.arange(30, 0, -1), np.linspace(0.5 * Rs, Rs, 9)[1:]])
    r, w = gl_panels(br, 16)
    A = spectral.angular_constant(m)
    base = w * spectral.radial_profile(m, r) * r ** (m.dim - 1) * (0.5 * r * r) ** k
    return A * (np.exp(-0.5 * np.multiply.outer(a, r * r)) @ base)


def _chunks(n, size):
    for i in range(0, n, size):
        yield slice(i, min(n, i + size))


def moment(m: SpectralMeasure, k: int, a, rtol: float = 1e-10) -> np.ndarray:
    """G_k(a) for a >= 0 (vectorized).  G_k(0) is the total weighted mass,
    returned as +inf with a warning when it diverges."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("moment argument must be nonnegative")
    if not spectral.has_radial_form(m):
        raise ValueError("Gamma needs a radial or fractional-product measure")
    out = np.empty(a.shape)
    pos = a > 0
    if np.any(pos):
        ap = a[pos]
        if m.support_radius is not None:
            out[pos] = _support_moment(m, k, ap)
        elif m.degree is not None:
            out[pos] = _homogeneous_moment(m, k, ap)
        else:
            out[pos] = _trapezoid_moment(m, k, ap, rtol)
    if np.any(~pos):
        out[~pos] = _mass_at_zero(m, k)
    return out[()] if out.ndim == 0 else out


def _mass_at_zero(m, k):
    if m.support_radius is not None:
        return float(_support_moment(m, k, np.zeros(1))[0])
    tau = m.tail_exponent if m.tail_exponent is not None else 0.0
    if m.degree is None and tau > 2 * k + m.dim:
        return spectral.radial_integral(m, lambda r: (0.5 * r * r) ** k)
    warnings.warn("Gamma diverges at the corner s = s' = t for this measure", RuntimeWarning,
                  stacklevel=3)
    return math.inf


class MomentTable:
    """Cubic-spline interpolant of log G_k against log a on [a_min, a_max].

    Used where thousands of distinct arguments are needed for a measure
    without closed-form moments; 40 nodes per decade keep the relative
    interpolation error near 1e-9.
    """

    def __init__(self, m: SpectralMeasure, k: int, a_min: float, a_max: float, rtol: float = 1e-11):
        self.exact = m.degree is not None and m.support_radius is None
        self.m, self.k = m, k
        if self.exact:
            return
        lo, hi = math.log10(a_min) - 0.1, math.log10(a_max) + 0.1
        la = np.linspace(lo, hi, max(8, int(math.ceil((hi - lo) * 40)) + 1))
        vals = moment(m, k, 10.0**la, rtol)
        self.lo, self.hi = 10.0**lo, 10.0**hi
        self.zero = not np.all(vals > 0)
        self.spline = None if self.zero else CubicSpline(la, np.log(vals))

    def __call__(self, a):
        if self.exact:
            return moment(self.m, self.k, a)
        a = np.asarray(a, dtype=float)
        if self.zero:
            return moment(self.m, self.k, a)
        if np.any(a < self.lo) or np.any(a > self.hi):
            raise ValueError("argument outside the tabulated range")
        return np.exp(self.spline(np.log10(a)))


@dataclass(frozen=True)
class GammaKernel:
    measure: SpectralMeasure
    t: float
    quad_tol: float = 1e-10

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("terminal time must be positive")

    def _arg(self, s, sp):
        s = np.asarray(s, dtype=float)
        sp = np.asarray(sp, dtype=float)
        return 2.0 * self.t - s - sp

    def __call__(self, s, sp):
        """Gamma(s, s') without the domain checks of ``gamma``; defined for any
        s + s' < 2t, negative times included."""
        a = self._arg(s, sp)
        if np.any(a <= 0):
            raise ValueError("Gamma is only defined for s + s' < 2t")
        return moment(self.measure, 0, a, self.quad_tol)


def gamma(k: GammaKernel, s, sp):
    """Gamma(s, s') for 0 <= s, s' <= t.

    Raises for 0 < 2t - s - s' < 1e-12.  At the corner itself the total mass is
    returned, which is +inf (with a warning) for infinite measures.
    """
    s_, sp_ = np.asarray(s, dtype=float), np.asarray(sp, dtype=float)
    if np.any(s_ < 0) or np.any(sp_ < 0) or np.any(s_ > k.t) or np.any(sp_ > k.t):
        raise ValueError("gamma needs 0 <= s, s' <= t")
    a = k._arg(s_, sp_)
    if np.any((a > 0) & (a < CORNER_MIN)):
        raise ValueError("too close to the corner s = s' = t")
    return moment(k.measure, 0, a, k.quad_tol)


def gamma_partial(k: GammaKernel, s, sp, order: str):
    """d Gamma/ds ('Ds'), d^2 Gamma/ds ds' ('DsDsp') or d^3 Gamma/ds^2 ds' ('D2sDsp').

    Each is the exact weighted integral with weight (|xi|^2/2)^n, n = 1, 2, 3.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {sorted(ORDERS)}")
    s_, sp_ = np.asarray(s, dtype=float), np.asarray(sp, dtype=float)
    if np.any(s_ < 0) or np.any(sp_ < 0):
        raise ValueError("gamma_partial needs nonnegative times")
    if np.any(s_ >= k.t) or np.any(sp_ >= k.t):
        raise ValueError("gamma_partial needs s, s' < t")
    a = k._arg(s_, sp_)
    if np.any(a < CORNER_MIN):
        raise ValueError("too close to the corner s = s' = t")
    return moment(k.measure, ORDERS[order], a, k.quad_tol)
