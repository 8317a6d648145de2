"""Reproduction recipes for the acceptance matrix, one function per criterion.

Each returns a Report whose verdict is PASS or FAIL, with the tolerance it
was judged against and the runtime.  ``run_all`` feeds ``spde report-all``.
"""

from __future__ import annotations

import math
import time
from typing import Callable

import numpy as np

from . import besov, covariance, ibp, spectral
from .gamma import GammaKernel, gamma, gamma_partial
from .report import DIVERGENT, FAIL, PASS, Report
from .sampler import convergence_study
from .variance import isometry_variance, variance_exact

# analysis exponent of the measure for white noise in d = 1 (needs 2 beta > 1)
WHITE_BETA = 0.55


def _timed(fn: Callable[[], Report], budget: float) -> Report:
    t0 = time.perf_counter()
    rep = fn()
    dt = time.perf_counter() - t0
    rep.values["runtime_s"] = dt
    rep.values["runtime_budget_s"] = budget
    return rep


def _verdict(ok: bool) -> str:
    return PASS if ok else FAIL


def criterion_1() -> Report:
    def run():
        cases = [
            ("riesz d=2 eta=1.9", spectral.riesz(2, 1.9), covariance.brownian(), True),
            ("riesz d=2 eta=2.1", spectral.riesz(2, 2.1), covariance.brownian(), False),
            ("bessel d=3 eta=1.1", spectral.bessel(3, 1.1), covariance.brownian(), True),
            ("bessel d=3 eta=0.9", spectral.bessel(3, 0.9), covariance.brownian(), False),
            ("fracprod H0=0.3 H1=0.6", spectral.fracprod([0.6]), covariance.fbm(0.3), True),
            ("fracprod H0=0.2 H1=0.5", spectral.fracprod([0.5]), covariance.fbm(0.2), False),
        ]
        rows = []
        for label, m, cov, expected in cases:
            v = spectral.existence_verdict(m, cov).values
            rows.append({"case": label, "expected": expected, "exists": v["exists"],
                         "analytic": v["analytic_verdict"], "numeric": v["numeric_verdict"],
                         "integral": v["integral"]})
        ok = all(r["exists"] == r["expected"] and r["numeric"] == r["expected"] for r in rows)
        return Report("criterion-1", _verdict(ok), {"cases": len(rows)}, {"cases": rows})
    return _timed(run, 30.0)


def criterion_2(rtol: float = 1e-3) -> Report:
    def run():
        bm = covariance.brownian()
        rows = []
        for t in (0.25, 1.0):
            v = variance_exact(bm, spectral.white(1, 1.0), t).total
            ref = math.sqrt(t / math.pi)
            rows.append({"case": f"white d=1 t={t}", "value": v, "oracle": ref,
                         "rel_err": abs(v - ref) / ref})
        for label, m in (("riesz d=2 eta=1", spectral.riesz(2, 1.0)),
                         ("bessel d=1 eta=1.5", spectral.bessel(1, 1.5))):
            v = variance_exact(bm, m, 1.0).total
            ref = isometry_variance(m, 1.0)
            rows.append({"case": label + " t=1", "value": v, "oracle": ref,
                         "rel_err": abs(v - ref) / ref})
        ok = all(r["rel_err"] <= rtol for r in rows)
        return Report("criterion-2", _verdict(ok), {"max_rel_err": max(r["rel_err"] for r in rows)},
                      {"cases": rows}, {"rel_err": rtol})
    return _timed(run, 120.0)


def _random_ibp_config(rng: np.random.Generator):
    kind = rng.integers(4)
    if kind == 0:
        cov = covariance.brownian()
    elif kind == 1:
        cov = covariance.fbm(float(rng.uniform(0.1, 0.9)))
    elif kind == 2:
        cov = covariance.product()
    else:
        c = float(rng.uniform(0.5, 2.0))
        cov = covariance.custom(lambda s, t, c=c: np.exp(-c * np.abs(s - t)) * np.minimum(s, t), beta=1.0)
    t = float(rng.uniform(0.5, 1.5))
    tt = float(rng.uniform(0.5, 1.5))
    lo = min(t, tt)
    eps = float(rng.uniform(0.02, 0.3) * lo)
    epst = float(rng.uniform(0.02, 0.3) * lo)
    g = rng.integers(3)
    if g == 0:
        meas = [spectral.white(1, 1.0), spectral.riesz(2, 1.0), spectral.bessel(1, 1.5)][rng.integers(3)]
        gk = GammaKernel(meas, float(max(t, tt) + rng.uniform(0.2, 1.0)))
        gamma_fn, glabel = gk, f"kernel[{meas.label}]"
    elif g == 1:
        a, b = rng.uniform(-1, 1, 2)
        gamma_fn, glabel = (lambda s, sp, a=a, b=b: np.cos(a * s + b * sp) + s * sp), "trig+poly"
    else:
        gamma_fn, glabel = (lambda s, sp: np.exp(-(s - sp) ** 2)), "gaussian"
    return gamma_fn, glabel, cov, ibp.DiscretizationPair(eps, epst, t, tt)


def criterion_3(n_configs: int = 50, seed: int = 2024, tol: float = 1e-9) -> Report:
    def run():
        rng = np.random.default_rng(seed)
        rows = []
        while len(rows) < n_configs:
            try:
                gamma_fn, glabel, cov, disc = _random_ibp_config(rng)
            except ValueError:
                continue
            terms = ibp.ibp_decompose(gamma_fn, cov, disc)
            rows.append({"gamma": glabel, "time_cov": cov.label, "eps": disc.eps,
                         "eps_tilde": disc.eps_tilde, "t": disc.t, "t_tilde": disc.t_tilde,
                         "A": terms.A, "residual": terms.residual,
                         "scaled_residual": terms.residual / (1.0 + abs(terms.A))})
        worst = max(r["scaled_residual"] for r in rows)
        return Report("criterion-3", _verdict(worst <= tol), {"configs": len(rows), "worst_scaled_residual": worst},
                      {"configs": rows}, {"residual_over_1_plus_A": tol}, rng={"seed": seed})
    return _timed(run, 60.0)


def _central(f, x, h):
    """Fourth-order central difference."""
    return (8.0 * (f(x + h) - f(x - h)) - (f(x + 2 * h) - f(x - 2 * h))) / (12.0 * h)


def criterion_4(n_points: int = 20, seed: int = 7, rtol: float = 1e-5) -> Report:
    def run():
        rng = np.random.default_rng(seed)
        measures = [spectral.white(1, 1.0), spectral.riesz(2, 1.0), spectral.bessel(1, 1.5),
                    spectral.fracprod([0.7])]
        t = 1.0
        h = 1e-3
        rows = []
        for i in range(n_points):
            m = measures[i % len(measures)]
            k = GammaKernel(m, t)
            s, sp = rng.uniform(0.05, 0.8, 2)
            d1 = float(gamma_partial(k, s, sp, "Ds"))
            fd1 = _central(lambda x: float(gamma(k, x, sp)), s, h)
            d2 = float(gamma_partial(k, s, sp, "DsDsp"))
            fd2 = _central(lambda y: float(gamma_partial(k, s, y, "Ds")), sp, h)
            d3 = float(gamma_partial(k, s, sp, "D2sDsp"))
            fd3 = _central(lambda x: float(gamma_partial(k, x, sp, "DsDsp")), s, h)
            for order, exact, fd in (("Ds", d1, fd1), ("DsDsp", d2, fd2), ("D2sDsp", d3, fd3)):
                rows.append({"measure": m.label, "s": float(s), "sp": float(sp), "order": order,
                             "exact": exact, "finite_difference": fd,
                             "rel_err": abs(exact - fd) / abs(exact)})
        worst = max(r["rel_err"] for r in rows)
        return Report("criterion-4", _verdict(worst <= rtol), {"points": n_points, "max_rel_err": worst},
                      {"checks": rows}, {"rel_err": rtol, "fd_step": h}, rng={"seed": seed})
    return _timed(run, 30.0)


def criterion_5(n_rep: int = 10_000, seed: int = 42, rel_tol: float = 0.01) -> Report:
    """Four clauses; the first (1% of 1/sqrt(pi) at eps = 2^-10) is expected to fail.

    The discrete scheme stops at t_eps = t - eps^(1/3), so its second moment
    tends to sqrt(t/pi) - sqrt(eps^(1/3)/pi) + O(sqrt(eps)) ~ 0.387 at
    eps = 2^-10, far outside 1%.  The value is reported, not adjusted.
    """
    def run():
        bm, wn = covariance.brownian(), spectral.white(1, 1.0)
        eps_list = tuple(2.0 ** -np.arange(4, 11))
        rep = convergence_study(bm, wn, 1.0, eps_list=eps_list, seed=seed, n_rep=n_rep)
        target = 1.0 / math.sqrt(math.pi)
        M = rep.values["final_second_moment"]
        gap = abs(M - target) / target
        eps = eps_list[-1]
        tk = eps * np.arange(int(round(1.0 / eps)))
        untruncated = float(np.sum(eps / np.sqrt(4 * math.pi * (1.0 - tk))))
        trunc_pred = target - math.sqrt(eps ** (1 / 3) / math.pi)
        div = convergence_study(bm, spectral.riesz(2, 2.5), 1.0, eps_list=eps_list[:4])
        clauses = {
            "moment_within_1pct": gap <= rel_tol,
            "cauchy_decreasing_n5_to_n9": rep.values["cauchy_decreasing"],
            "mc_within_3se": rep.values["mc_within_3se"],
            "riesz_2.5_divergent": div.verdict == DIVERGENT,
        }
        values = {"second_moment_eps_2^-10": M, "target": target, "rel_gap": gap,
                  "truncation_prediction": trunc_pred, "untruncated_sum": untruncated,
                  "mc_variance": rep.values["mc_variance"], "mc_se": rep.values["mc_se"],
                  "clauses": clauses}
        return Report("criterion-5", _verdict(all(clauses.values())), values,
                      {"cauchy": rep.tables["cauchy"], "moments": rep.tables["moments"]},
                      {"rel_gap": rel_tol, "mc_se_multiple": 3.0}, rng=rep.rng,
                      notes=["moment clause unattainable under the t - eps^(1/3) cutoff; see the decisions ledger"])
    return _timed(run, 180.0)


def criterion_6(tol: float = 1e-10) -> Report:
    def run():
        rows = []
        ok = True
        rng = np.random.default_rng(11)
        for N, L, d in ((1024, 32.0, 1), (128, 16.0, 2)):
            p = besov.build_partition(N, L, d)
            pou = float(np.abs(p.chi + sum(p.phi_j) - 1.0).max())
            r = rng.uniform(0.0, p.grid.xi_max, 10_000)
            J = p.j_max
            rand = float(np.abs(besov.chi(r) + sum(besov.phi(r * 2.0**-j) for j in range(J + 1)) - 1.0).max())
            f = besov.GridField(rng.standard_normal(p.grid.shape), p.grid)
            blocks = besov.all_blocks(f.values, p)
            recon = float(np.linalg.norm(blocks.sum(axis=0) - f.values) / np.linalg.norm(f.values))
            disjoint = bool(np.all(p.phi_j[1] * p.phi_j[3] == 0.0) and np.all(p.chi * p.phi_j[2] == 0.0))
            far = all(np.all(p.phi_j[j] * p.phi_j[k] == 0.0)
                      for j in range(J + 1) for k in range(j + 2, J + 1))
            rows.append({"N": N, "L": L, "d": d, "j_max": J, "pou_grid_err": pou, "pou_random_err": rand,
                         "reconstruction_rel_err": recon, "disjoint_products_zero": disjoint and far})
            ok &= pou <= tol and rand <= tol and recon <= tol and disjoint and far
        return Report("criterion-6", _verdict(ok), {"grids": len(rows)}, {"grids": rows}, {"abs_err": tol})
    return _timed(run, 30.0)


def criterion_7(n_rep: int = 200, seed: int = 5, tol: float = 0.1) -> Report:
    def run():
        grid = besov.PeriodicGrid(1024, 32.0, 1)
        bp = besov.BesovParams(kappa=-WHITE_BETA - 0.05, q=1)
        lags = np.logspace(-3, -0.5, 9)
        rows = []
        for H in (0.4, 0.8):
            r = besov.noise_scaling_study(covariance.fbm(H), spectral.white(1, 1.0), grid, bp, lags,
                                          s0=0.1, n_rep=n_rep, seed=seed, expected_slope=2 * H, tol=tol)
            rows.append({"H0": H, "slope": r.values["slope"], "expected": 2 * H,
                         "stderr": r.values["slope_stderr"], "r2": r.values["r2"],
                         "ratio_to_rect_min": r.values["min_ratio_to_rect"],
                         "ratio_to_rect_max": r.values["max_ratio_to_rect"], "verdict": r.verdict})
        ok = all(abs(r["slope"] - r["expected"]) <= tol for r in rows)
        return Report("criterion-7", _verdict(ok), {"kappa": bp.kappa, "replicates": n_rep},
                      {"slopes": rows}, {"slope": tol}, rng={"seed": seed, "replicates": n_rep})
    return _timed(run, 180.0)


def criterion_8(tol: float = 0.15, n_fields: int = 50, seed: int = 3) -> Report:
    def run():
        p = besov.build_partition(1024, 32.0, 1)
        g = p.grid
        fields = [besov.sample_noise_field(covariance.brownian(), spectral.white(1, 1.0), 0.0, 1.0, g, seed, r)
                  for r in range(n_fields)]
        heat = besov.smoothing_rate_check(fields, p, -0.6, 0.4, np.logspace(-2.5, -0.5, 8), tol=tol)
        smooth = besov.GridField(np.cos(4 * np.pi * g.x_axis / g.L), g)
        comp = besov.smoothing_rate_check(smooth, p, -0.6, 0.4, np.logspace(-3, -1, 8), kappa=1.4, tol=tol)
        values = {"heat_slope": heat.values["slope"], "heat_expected": -0.5, "fields": n_fields,
                  "complement_slope": comp.values["complement_slope"], "complement_expected": 1.0}
        ok = heat.values["heat_ok"] and comp.values["complement_ok"]
        return Report("criterion-8", _verdict(ok), values,
                      {"heat": heat.tables["rates"], "complement": comp.tables["rates"]}, {"slope": tol},
                      rng={"seed": seed, "replicates": n_fields})
    return _timed(run, 60.0)


def criterion_9(n_rep: int = 100, seed: int = 9, theta_min: float = 0.2) -> Report:
    def run():
        cov = covariance.fbm(0.8)
        beta_prime, beta, eta = cov.beta, WHITE_BETA, 0.2
        grid = besov.PeriodicGrid(1024, 32.0, 1)
        r = besov.cauchy_decay_study(cov, spectral.white(1, 1.0), range(2, 8), 1.0, grid,
                                     besov.BesovParams(eta, 1), n_rep=n_rep, seed=seed, theta_min=theta_min)
        cfg_ok = beta_prime - beta >= 0.5 and eta <= 0.2 * (beta_prime - beta)
        values = dict(r.values)
        values.update({"beta_prime": beta_prime, "beta": beta, "configuration_valid": cfg_ok})
        return Report("criterion-9", _verdict(r.verdict == PASS and cfg_ok), values, r.tables,
                      {"theta_min": theta_min}, rng=r.rng)
    return _timed(run, 300.0)


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def summary_line(k: int, rep: Report) -> str:
    return f"criterion {k}: {rep.verdict} ({rep.values['runtime_s']:.1f}s of {rep.values['runtime_budget_s']:.0f}s)"


def run_all() -> Report:
    rows = []
    for k, fn in CRITERIA.items():
        rep = fn()
        rows.append({"criterion": k, "verdict": rep.verdict, "runtime_s": rep.values["runtime_s"],
                     "runtime_budget_s": rep.values["runtime_budget_s"]})
    ok = all(r["verdict"] == PASS for r in rows)
    return Report("report-all", _verdict(ok), {"passed": sum(r["verdict"] == PASS for r in rows),
                                                "total": len(rows)}, {"summary": rows})
