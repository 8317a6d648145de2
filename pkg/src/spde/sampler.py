"""Wong-Zakai approximations u_eps(t, x) of the stochastic convolution.

u_eps(t, x) = sum_{t_k < t_eps} Z_k with Z_k the Wiener integral of the heat
kernel frozen at the left endpoint t_k over [t_k, t_k + eps].  The Z_k are
jointly Gaussian with Gram matrix

    G_kl = rect([t_k, t_k+eps] x [t_l, t_l+eps]) * G_0(2t - t_k - t_l),

which does not depend on x because the Fourier phases cancel.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .covariance import TimeCovariance, interval_gram
from .gamma import moment
from .report import COMPUTED, DIVERGENT, FAIL, PASS, Report
from .spectral import SpectralMeasure
from .variance import variance_exact

RNG_NAME = "numpy Philox4x64, SeedSequence((seed, replicate))"


@dataclass(frozen=True)
class WZGrid:
    t: float
    eps: float
    x: tuple = (0.0,)

    def __post_init__(self):
        if not (self.eps > 0 and self.t > 0):
            raise ValueError("need positive t and eps")
        if self.t_eps <= 0:
            raise ValueError("eps too large: t - eps^(1/3) must be positive")

    @property
    def t_eps(self) -> float:
        return self.t - self.eps ** (1.0 / 3.0)

    @property
    def k_max(self) -> int:
        return int(math.ceil(self.t_eps / self.eps))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.k_max) * self.eps


@dataclass
class NoiseGram:
    matrix: np.ndarray
    grid: WZGrid
    min_eig: float = 0.0
    meta: dict = field(default_factory=dict)


def _g0_on(m: SpectralMeasure, a: np.ndarray) -> np.ndarray:
    """G_0 on an array of arguments, evaluated once per distinct value."""
    uniq, inv = np.unique(a, return_inverse=True)
    return moment(m, 0, uniq)[inv].reshape(a.shape)


def build_gram(cov: TimeCovariance, m: SpectralMeasure, grid: WZGrid, check_psd: bool = True) -> NoiseGram:
    tk = grid.times
    e = grid.eps
    rect = interval_gram(cov, tk, tk + e)
    # t_k + t_l = (k + l) eps, so G_0 is needed at 2 k_max - 1 distinct points
    n = grid.k_max
    sums = np.arange(2 * n - 1) * e
    S = moment(m, 0, 2.0 * grid.t - sums)
    idx = np.add.outer(np.arange(n), np.arange(n))
    G = rect * S[idx]
    min_eig = 0.0
    if check_psd and n:
        ev = np.linalg.eigvalsh(G)
        min_eig = float(ev[0])
        tr = float(np.trace(G))
        if min_eig < -1e-8 * tr:
            raise ValueError(f"Gram matrix not PSD (min eigenvalue {min_eig:.3e}, trace {tr:.3e}); "
                             "inconsistent covariance and measure inputs")
    return NoiseGram(G, grid, min_eig)


def discrete_second_moment(g: NoiseGram) -> float:
    """E[u_eps(t,x)^2] = sum_{k,l} G_kl."""
    return float(np.sum(g.matrix))


def cross_moment(cov: TimeCovariance, m: SpectralMeasure, g1: WZGrid, g2: WZGrid) -> float:
    """E[u_eps u_eps~] from the rectangular Gram across the two grids."""
    if g1.t != g2.t:
        raise ValueError("grids must share the terminal time")
    a, b = g1.times, g2.times
    rect = interval_gram(cov, a, a + g1.eps, b, b + g2.eps)
    S = _g0_on(m, 2.0 * g1.t - np.add.outer(a, b))
    return float(np.sum(rect * S))


def factorize(G: np.ndarray):
    """Lower factor L with L L^T ~ G: Cholesky, then a 1e-12 trace shift, then eigen-clipping."""
    tr = float(np.trace(G))
    try:
        return np.linalg.cholesky(G), {"method": "cholesky", "shift": 0.0, "clip_mass": 0.0}
    except np.linalg.LinAlgError:
        pass
    shift = 1e-12 * tr
    try:
        return (np.linalg.cholesky(G + shift * np.eye(G.shape[0])),
                {"method": "cholesky+shift", "shift": shift, "clip_mass": 0.0})
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(G)
    if w[0] < -1e-8 * tr:
        raise ValueError("factorization failed: matrix is not positive semidefinite")
    clip = float(-w[w < 0].sum())
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w), {"method": "eigen-clip", "shift": 0.0, "clip_mass": clip}


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Independent stream for replicate r, keyed by (seed, r)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(r)])))


def standard_normals(seed: int, n_rep: int, size: int, threads: int = 1) -> np.ndarray:
    """(n_rep, size) standard normals, row r from replicate_rng(seed, r).

    Rows never depend on how replicates are split among threads.
    """
    out = np.empty((n_rep, size))

    def fill(rows):
        for r in rows:
            out[r] = replicate_rng(seed, r).standard_normal(size)

    if threads <= 1 or n_rep < 2 * threads:
        fill(range(n_rep))
    else:
        parts = np.array_split(np.arange(n_rep), threads)
        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(fill, parts))
    return out


def sample_wz(g: NoiseGram, seed: int, n_rep: int, threads: int = 1) -> np.ndarray:
    """n_rep draws of u_eps(t, x) = sum_k Z_k with Z = L xi."""
    L, info = factorize(g.matrix)
    g.meta.update(info)
    v = L.sum(axis=0)  # u = 1^T L xi = (L^T 1) . xi
    xi = standard_normals(seed, n_rep, L.shape[1], threads)
    return xi @ v


def convergence_study(cov: TimeCovariance, m: SpectralMeasure, t: float, x=(0.0,),
                      eps_list=tuple(2.0 ** -np.arange(4, 11)), seed: int = 42, n_rep: int = 0,
                      threads: int = 1, burn_in: int = 1) -> Report:
    """Second moments, adjacent cross moments and Cauchy quantities along eps_list.

    The first ``burn_in`` Cauchy pairs are tabulated but left out of the
    monotonicity check; the coarsest pairs are pre-asymptotic.
    """
    eps_list = [float(e) for e in eps_list]
    if burn_in < 0 or burn_in > len(eps_list) - 3:
        raise ValueError("burn_in must leave at least two Cauchy pairs")
    if len(eps_list) < 2 or any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing with at least two entries")
    grids = [WZGrid(t, e, tuple(np.atleast_1d(x))) for e in eps_list]
    moments = [discrete_second_moment(build_gram(cov, m, g)) for g in grids]
    exists = bool(spectral.existence_verdict(m, cov).values["exists"])
    vb = variance_exact(cov, m, t)
    target = vb.total
    rows = []
    for e, g, M in zip(eps_list, grids, moments):
        rows.append({"eps": e, "k_max": g.k_max, "t_eps": g.t_eps, "second_moment": M,
                     "target": target,
                     "rel_gap": (M - target) / target if math.isfinite(target) and target else math.nan})
    pairs = []
    for (g1, M1), (g2, M2) in zip(zip(grids, moments), zip(grids[1:], moments[1:])):
        C = cross_moment(cov, m, g1, g2)
        pairs.append({"eps": g1.eps, "eps_next": g2.eps, "cross_moment": C,
                      "cauchy": M1 + M2 - 2.0 * C})
    cauchy = np.array([p["cauchy"] for p in pairs])
    floor = 1e-12 * max(moments)
    cauchy_decreasing = bool(np.all(np.diff(cauchy[burn_in:]) < floor))
    inc = np.diff(moments)
    growth = [abs(inc[i + 1]) / abs(inc[i]) if inc[i] != 0 else 0.0 for i in range(len(inc) - 1)]
    settling = bool(growth and growth[-1] < 1.0)
    gaps = np.abs(np.array(moments) - target) if math.isfinite(target) else None
    approaching = bool(gaps is not None and np.all(np.diff(gaps) < 0))

    if not exists or vb.divergent or not settling:
        verdict = DIVERGENT
    elif cauchy_decreasing and approaching:
        verdict = PASS
    else:
        verdict = FAIL
    values = {
        "time_cov": cov.label, "measure": m.label, "dim": m.dim, "t": t, "x": list(np.atleast_1d(x)),
        "target_variance": target, "existence": exists,
        "final_second_moment": moments[-1],
        "final_rel_gap": rows[-1]["rel_gap"],
        "cauchy_decreasing": cauchy_decreasing,
        "cauchy_burn_in": burn_in,
        "moments_approach_target": approaching,
        "moment_increment_ratios": growth,
    }
    rng = {}
    if n_rep:
        draws = sample_wz(build_gram(cov, m, grids[-1]), seed, n_rep, threads)
        var = float(np.var(draws, ddof=1))
        se = moments[-1] * math.sqrt(2.0 / (n_rep - 1))
        values.update({"mc_variance": var, "mc_mean": float(draws.mean()), "mc_se": se,
                       "mc_within_3se": bool(abs(var - moments[-1]) <= 3 * se)})
        rng = {"seed": seed, "algorithm": RNG_NAME, "replicates": n_rep}
    return Report(name="converge", verdict=verdict, values=values,
                  tables={"moments": rows, "cauchy": pairs},
                  tolerances={"cauchy_noise_floor": floor}, rng=rng)


def simulate_report(cov: TimeCovariance, m: SpectralMeasure, t: float, eps: float, n_rep: int,
                    seed: int, x=(0.0,), threads: int = 1) -> tuple[Report, np.ndarray]:
    g = build_gram(cov, m, WZGrid(t, eps, tuple(np.atleast_1d(x))))
    M = discrete_second_moment(g)
    draws = sample_wz(g, seed, n_rep, threads)
    var = float(np.var(draws, ddof=1)) if n_rep > 1 else math.nan
    se = M * math.sqrt(2.0 / (n_rep - 1)) if n_rep > 1 else math.nan
    mean_se = math.sqrt(M / n_rep) if n_rep else math.nan
    ok = n_rep > 1 and abs(var - M) <= 3 * se and abs(float(draws.mean())) <= 3 * mean_se
    rep = Report(
        name="simulate",
        verdict=PASS if ok else (COMPUTED if n_rep <= 1 else FAIL),
        values={"time_cov": cov.label, "measure": m.label, "dim": m.dim, "t": t, "eps": eps,
                "t_eps": g.grid.t_eps, "k_max": g.grid.k_max, "gram_second_moment": M,
                "sample_mean": float(draws.mean()) if n_rep else math.nan,
                "sample_variance": var, "variance_se": se, "gram_min_eig": g.min_eig,
                "factorization": g.meta.get("method")},
        tolerances={"variance_se_multiple": 3.0},
        rng={"seed": seed, "algorithm": RNG_NAME, "replicates": n_rep},
    )
    return rep, draws
