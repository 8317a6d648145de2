"""Time covariance functions R(s, t) and their rectangular increments."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .report import FAIL, PASS, Report, fit_loglog

BROWNIAN = "brownian"
FBM = "fbm"
PRODUCT = "product"
CUSTOM = "custom"


@dataclass(frozen=True)
class TimeCovariance:
    """A time covariance R together with its declared increment exponent.

    ``beta`` is the exponent in |R(t,t) - R(t,v) - R(u,t) + R(u,v)| ~ (t - u^v)^beta.
    The upper constant bounds that ratio everywhere on s, s' < t; the lower
    constant is only checked on the diagonal u = v (see ``verify_increment_exponent``).
    """

    kind: str
    beta: float
    holder_const_upper: float = 1.0
    holder_const_lower: float = 1.0
    hurst: Optional[float] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in (BROWNIAN, FBM, PRODUCT, CUSTOM):
            raise ValueError(f"unknown time covariance kind {self.kind!r}")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.kind == FBM and not (self.hurst is not None and 0.0 < self.hurst < 1.0):
            raise ValueError("fractional Brownian covariance needs H0 in (0, 1)")
        if self.kind == CUSTOM and self.func is None:
            raise ValueError("custom covariance needs a callable")

    def __call__(self, s, t):
        return eval_R(self, s, t)

    @property
    def label(self) -> str:
        if self.kind == FBM:
            return f"fbm:H0={self.hurst:g}"
        return self.kind


def brownian() -> TimeCovariance:
    return TimeCovariance(BROWNIAN, beta=1.0)


def fbm(H0: float) -> TimeCovariance:
    return TimeCovariance(FBM, beta=2.0 * H0, hurst=float(H0))


def product() -> TimeCovariance:
    return TimeCovariance(PRODUCT, beta=2.0)


def custom(func: Callable, beta: float, upper: float = 1.0, lower: float = 0.0) -> TimeCovariance:
    """Wrap a user covariance; ``beta`` and the constants are declared, not inferred."""
    return TimeCovariance(CUSTOM, beta=float(beta), holder_const_upper=upper,
                          holder_const_lower=lower, func=func)


def parse_time_cov(spec: str) -> TimeCovariance:
    """Parse ``"brownian"``, ``"product"`` or ``"fbm:H0=<x>"``."""
    text = spec.strip().lower()
    if text == BROWNIAN:
        return brownian()
    if text == PRODUCT:
        return product()
    m = re.fullmatch(r"fbm:h0=([0-9.eE+-]+)", text)
    if m:
        return fbm(float(m.group(1)))
    raise ValueError(f"cannot parse time covariance {spec!r}")


def _check_times(*args):
    for a in args:
        if np.any(np.asarray(a) < 0):
            raise ValueError("times must be nonnegative")


def eval_R(cov: TimeCovariance, s, t):
    """R(s, t) for nonnegative times; broadcasts over arrays."""
    _check_times(s, t)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if cov.kind == BROWNIAN:
        out = np.minimum(s, t)
    elif cov.kind == FBM:
        h2 = 2.0 * cov.hurst
        out = 0.5 * (s**h2 + t**h2 - np.abs(s - t) ** h2)
    elif cov.kind == PRODUCT:
        out = s * t
    else:
        out = np.asarray(cov.func(s, t), dtype=float)
    return out[()] if out.ndim == 0 else out


def rect_increment(cov: TimeCovariance, s, t, u, v):
    """R(v,t) - R(v,s) - R(u,t) + R(u,s): covariance of X_t - X_s and X_v - X_u."""
    if np.any(np.asarray(s) > np.asarray(t)) or np.any(np.asarray(u) > np.asarray(v)):
        raise ValueError("interval endpoints must be ordered (s <= t, u <= v)")
    return eval_R(cov, v, t) - eval_R(cov, v, s) - eval_R(cov, u, t) + eval_R(cov, u, s)


def increment_cov(cov: TimeCovariance, t, s, sp):
    """E[(X_t - X_s)(X_t - X_sp)] for s, sp <= t, in a cancellation-free form for presets."""
    _check_times(s, sp)
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    sp = np.asarray(sp, dtype=float)
    if cov.kind == BROWNIAN:
        out = t - np.maximum(s, sp)
    elif cov.kind == FBM:
        h2 = 2.0 * cov.hurst
        out = 0.5 * ((t - s) ** h2 + (t - sp) ** h2 - np.abs(s - sp) ** h2)
    elif cov.kind == PRODUCT:
        out = (t - s) * (t - sp)
    else:
        out = eval_R(cov, t, t) - eval_R(cov, t, s) - eval_R(cov, sp, t) + eval_R(cov, sp, s)
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def interval_gram(cov: TimeCovariance, starts, ends, starts2=None, ends2=None) -> np.ndarray:
    """Matrix of rect increments over pairs of intervals [a_k, b_k] x [c_l, d_l].

    With a single family the result is symmetrized from the upper triangle so
    that it is exactly symmetric.
    """
    a = np.asarray(starts, dtype=float)[:, None]
    b = np.asarray(ends, dtype=float)[:, None]
    same = starts2 is None
    c = (a if same else np.asarray(starts2, dtype=float)[:, None]).T
    d = (b if same else np.asarray(ends2, dtype=float)[:, None]).T
    G = rect_increment(cov, c, d, a, b)
    G = np.asarray(G, dtype=float)
    if same:
        iu = np.triu_indices(G.shape[0], 1)
        G[(iu[1], iu[0])] = G[iu]
    return G


def verify_increment_exponent(cov: TimeCovariance, horizon: float, grid_n: int) -> Report:
    """Check the increment hypothesis on a uniform grid.

    For all grid triples u, v < t <= horizon the ratio
    |rect([u,t] x [v,t])| / (t - u^v)^beta is computed.  The upper constant must
    dominate every ratio; the lower constant is compared against the diagonal
    ratios (u = v), where the two-sided bound is meaningful for all presets.
    The Hölder-type slope of R(t, .) is estimated from the worst increment at
    each lag.
    """
    if grid_n < 8 or horizon <= 0:
        raise ValueError("need grid_n >= 8 and a positive horizon")
    g = np.arange(grid_n + 1) * (horizon / grid_n)
    iu, iv, it = np.meshgrid(np.arange(grid_n + 1), np.arange(grid_n + 1),
                             np.arange(grid_n + 1), indexing="ij")
    mask = (iu < it) & (iv < it)
    u, v, t = g[iu[mask]], g[iv[mask]], g[it[mask]]
    num = np.abs(increment_cov(cov, t, u, v))
    den = (t - np.minimum(u, v)) ** cov.beta
    ratio = num / den
    diag = iu[mask] == iv[mask]
    rmin, rmax = float(ratio.min()), float(ratio.max())
    dmin = float(ratio[diag].min())

    # Hölder modulus of R(t, .): worst |R(t,u) - R(t,v)| for each lag |u - v|
    lags, mods = [], []
    T = g[:, None, None]
    U = g[None, :, None]
    V = g[None, None, :]
    diff = np.abs(eval_R(cov, np.broadcast_to(T, (grid_n + 1,) * 3),
                         np.broadcast_to(U, (grid_n + 1,) * 3))
                  - eval_R(cov, np.broadcast_to(T, (grid_n + 1,) * 3),
                           np.broadcast_to(V, (grid_n + 1,) * 3)))
    lag_idx = np.abs(np.arange(grid_n + 1)[:, None] - np.arange(grid_n + 1)[None, :])
    for k in range(1, grid_n // 2 + 1):
        sel = lag_idx == k
        worst = float(diff[:, sel].max())
        if worst > 0:
            lags.append(k * horizon / grid_n)
            mods.append(worst)
    fit = fit_loglog(lags, mods) if len(lags) >= 2 else {"slope": float("nan")}

    finite = np.isfinite(rmax / rmin) if rmin > 0 else False
    ok = bool(finite and rmax <= cov.holder_const_upper * (1 + 1e-12)
              and dmin >= cov.holder_const_lower * (1 - 1e-12))
    slope_ok = bool(fit["slope"] >= cov.beta / 2 - 1e-9)
    return Report(
        name="increment_exponent",
        verdict=PASS if ok else FAIL,
        values={
            "kind": cov.label,
            "beta": cov.beta,
            "min_ratio": rmin,
            "max_ratio": rmax,
            "diagonal_min_ratio": dmin,
            "holder_const_upper": cov.holder_const_upper,
            "holder_const_lower": cov.holder_const_lower,
            "increment_slope": fit["slope"],
            "increment_slope_ok": slope_ok,
            "triples": int(mask.sum()),
        },
        tables={"holder_modulus": [{"lag": a, "max_abs_increment": b} for a, b in zip(lags, mods)]},
    )
