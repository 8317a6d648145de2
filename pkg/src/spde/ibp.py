"""Discretized integrals and the discrete integration-by-parts identity.

Every sum runs over a grid anchored at 0, s = k eps and s' = l eps~, with the
ranges [a, b) turned into integer index ranges once.  The identity
A = A0 + I0 + I1 + I2 + I3 + I4 is then a rearrangement of finitely many
terms, so the residual only reflects floating-point summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .covariance import TimeCovariance, eval_R


def count_below(t: float, eps: float) -> int:
    """Number of k >= 0 with k*eps < t."""
    if t <= 0:
        return 0
    n = math.ceil(t / eps)
    while n > 0 and (n - 1) * eps >= t:
        n -= 1
    while n * eps < t:
        n += 1
    return n


def disc_integral(f: Callable, s: float, t: float, eps: float, anchor: float | None = None) -> float:
    """eps * sum f(t_k) over grid points s <= t_k < t, t_k = anchor + k eps.

    The grid starts at ``s`` unless another anchor is given.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if t < s:
        raise ValueError("need s <= t")
    a = s if anchor is None else anchor
    k0, k1 = _first_index(s, a, eps), _first_index(t, a, eps)
    k = np.arange(k0, k1)
    pts = a + k * eps
    if pts.size == 0:
        return 0.0
    vals = _vec(f)(pts)
    return float(eps * np.sum(vals))


def _first_index(x: float, a: float, eps: float) -> int:
    """Smallest integer k with a + k eps >= x."""
    k = math.ceil((x - a) / eps)
    while a + (k - 1) * eps >= x:
        k -= 1
    while a + k * eps < x:
        k += 1
    return k


def _vec(f):
    def g(*args):
        try:
            out = np.asarray(f(*args), dtype=float)
            if out.shape == np.broadcast(*args).shape:
                return out
        except Exception:
            pass
        return np.vectorize(lambda *a: float(f(*a)), otypes=[float])(*args)
    return g


@dataclass(frozen=True)
class DiscretizationPair:
    eps: float
    eps_tilde: float
    t: float
    t_tilde: float

    def __post_init__(self):
        if not (0 < self.eps < self.t and 0 < self.eps_tilde < self.t_tilde):
            raise ValueError("need 0 < eps < t and 0 < eps_tilde < t_tilde")
        if self.n < 2 or self.n_tilde < 2:
            raise ValueError("grid too coarse: fewer than 2 points in a direction")
        if self.eps >= min(self.t, self.t_tilde) or self.eps_tilde >= min(self.t, self.t_tilde):
            raise ValueError("eps and eps_tilde must be below min(t, t_tilde)")

    @property
    def n(self) -> int:
        return count_below(self.t, self.eps)

    @property
    def n_tilde(self) -> int:
        return count_below(self.t_tilde, self.eps_tilde)


@dataclass
class IBPTerms:
    A: float
    A0: float
    I0: float
    I1: float
    I2: float
    I3: float
    I4: float
    residual: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def ibp_decompose(gamma_fn: Callable, R, disc: DiscretizationPair) -> IBPTerms:
    """Compute A directly and each term of its integration-by-parts decomposition.

    ``R`` is a TimeCovariance or a callable R(s, s').  ``gamma_fn`` must be
    defined on a margin of width eps (eps~) below 0 in each argument.
    """
    e, et = disc.eps, disc.eps_tilde
    n, nt = disc.n, disc.n_tilde
    G = _vec(gamma_fn)
    Rf = (lambda s, sp: eval_R(R, s, sp)) if isinstance(R, TimeCovariance) else _vec(R)

    def S(f, k0, k1, l0, l1):
        """e et * sum over k in [k0, k1), l in [l0, l1) of f(k e, l et)."""
        if k1 <= k0 or l1 <= l0:
            return 0.0
        s = (np.arange(k0, k1) * e)[:, None]
        sp = (np.arange(l0, l1) * et)[None, :]
        s, sp = np.broadcast_arrays(s, sp)
        return float(e * et * np.sum(f(s, sp)))

    def rectR(s, sp):
        return Rf(s + e, sp + et) - Rf(s + e, sp) - Rf(s, sp + et) + Rf(s, sp)

    A = S(lambda s, sp: G(s, sp) * rectR(s, sp), 0, n, 0, nt)
    A0 = S(lambda s, sp: (G(s, sp) - G(s, sp - et) - G(s - e, sp) + G(s - e, sp - et)) * Rf(s, sp),
           0, n, 0, nt)

    def GR(shift_s, shift_sp):
        return lambda s, sp: G(s - shift_s, sp - shift_sp) * Rf(s, sp)

    # [t, t+e) is the single index n; [0, e) is index 0; [e, t) is 1..n-1
    I01 = S(GR(e, et), n, n + 1, nt, nt + 1)
    I00 = S(GR(e, et), 0, 1, 0, 1)
    I11 = S(lambda s, sp: (G(s - e, sp - et) - G(s - e, sp)) * Rf(s, sp), n, n + 1, 1, nt)
    I10 = S(GR(e, 0.0), n, n + 1, 0, 1)
    I21 = S(lambda s, sp: (G(s - e, sp - et) - G(s, sp - et)) * Rf(s, sp), 1, n, nt, nt + 1)
    I20 = S(GR(0.0, et), 0, 1, nt, nt + 1)
    I3 = (S(lambda s, sp: (G(s - e, sp) - G(s - e, sp - et)) * Rf(s, sp), 0, 1, 1, nt)
          + S(GR(e, 0.0), 0, 1, 0, 1))
    I4 = (S(lambda s, sp: (G(s, sp - et) - G(s - e, sp - et)) * Rf(s, sp), 1, n, 0, 1)
          + S(GR(0.0, et), 0, 1, 0, 1))
    I0 = I01 - I00
    I1 = I11 - I10
    I2 = I21 - I20
    residual = abs(A - (A0 + I0 + I1 + I2 + I3 + I4))
    return IBPTerms(A, A0, I0, I1, I2, I3, I4, residual)


def i3_limit(dgamma_dsp: Callable, gamma_fn: Callable, R, t_tilde: float) -> float:
    """Limit of I3 / (eps eps~): int_0^t~ dGamma/ds'(0, s') R(0, s') ds' + Gamma(0,0) R(0,0)."""
    Rf = (lambda s, sp: float(eval_R(R, s, sp))) if isinstance(R, TimeCovariance) else R
    val, _ = integrate.quad(lambda sp: float(dgamma_dsp(0.0, sp)) * Rf(0.0, sp), 0.0, t_tilde,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return val + float(gamma_fn(0.0, 0.0)) * Rf(0.0, 0.0)
