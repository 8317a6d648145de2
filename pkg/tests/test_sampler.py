import math

import numpy as np
import pytest

from spde import covariance as cv
from spde import spectral as sp
from spde.gamma import moment
from spde.sampler import (WZGrid, build_gram, convergence_study, cross_moment, discrete_second_moment,
                          factorize, sample_wz, simulate_report)


def test_grid_geometry():
    g = WZGrid(1.0, 2.0**-6)
    assert g.t_eps == pytest.approx(0.75)
    assert g.k_max == 48
    assert g.times[-1] < g.t_eps
    with pytest.raises(ValueError):
        WZGrid(0.5, 0.2)


def test_brownian_gram_diagonal():
    m = sp.riesz(2, 1.0)
    g = WZGrid(1.0, 2.0**-5)
    G = build_gram(cv.brownian(), m, g).matrix
    assert np.count_nonzero(G - np.diag(np.diag(G))) == 0
    tk = g.times
    assert np.allclose(np.diag(G), g.eps * moment(m, 0, 2 * (1.0 - tk)), rtol=1e-12)


def test_product_gram_rank_one():
    m = sp.white(1)
    g = WZGrid(1.0, 2.0**-5)
    G = build_gram(cv.product(), m, g).matrix
    tk = g.times
    # rect = eps^2 for every pair
    S = moment(m, 0, 2.0 - np.add.outer(tk, tk))
    assert np.allclose(G, g.eps**2 * S, rtol=1e-12)


def test_exact_discrete_sum_white():
    # Brownian/White d=1: G_kk = eps / sqrt(4 pi (t - t_k))
    for n in (5, 8, 10):
        g = WZGrid(1.0, 2.0**-n)
        ref = math.fsum(g.eps / math.sqrt(4 * math.pi * (1.0 - tk)) for tk in g.times)
        assert discrete_second_moment(build_gram(cv.brownian(), sp.white(1), g)) == pytest.approx(ref, rel=1e-12)


def test_truncation_prediction():
    # the sum stops near t - eps^{1/3}, so it tends to sqrt(1/pi) - sqrt(eps^{1/3}/pi)
    e = 2.0**-10
    M = discrete_second_moment(build_gram(cv.brownian(), sp.white(1), WZGrid(1.0, e)))
    assert M == pytest.approx((1 - e ** (1 / 6)) / math.sqrt(math.pi), rel=2e-3)


def test_symmetric_and_x_invariant():
    m = sp.bessel(1, 1.5)
    G1 = build_gram(cv.fbm(0.7), m, WZGrid(1.0, 2.0**-5, (0.0,))).matrix
    G2 = build_gram(cv.fbm(0.7), m, WZGrid(1.0, 2.0**-5, (3.7,))).matrix
    assert np.array_equal(G1, G1.T)
    assert np.array_equal(G1, G2)


def test_zero_measure():
    g = build_gram(cv.brownian(), sp.white(1, 0.0), WZGrid(1.0, 2.0**-5))
    assert discrete_second_moment(g) == 0.0


@pytest.mark.parametrize("cov", [cv.brownian(), cv.fbm(0.3), cv.fbm(0.8), cv.product()])
@pytest.mark.parametrize("m", [sp.white(1), sp.riesz(2, 1.0), sp.bessel(2, 0.8)])
def test_gram_psd(cov, m):
    g = build_gram(cov, m, WZGrid(1.0, 2.0**-6))
    assert g.min_eig >= -1e-8 * np.trace(g.matrix)


def test_cauchy_nonnegative():
    for cov in (cv.brownian(), cv.fbm(0.7)):
        g1, g2 = WZGrid(1.0, 2.0**-5), WZGrid(1.0, 2.0**-6)
        M1 = discrete_second_moment(build_gram(cov, sp.white(1), g1))
        M2 = discrete_second_moment(build_gram(cov, sp.white(1), g2))
        assert M1 + M2 - 2 * cross_moment(cov, sp.white(1), g1, g2) >= -1e-8


def test_factorize_fallbacks():
    v = np.array([1.0, 2.0, 3.0])
    G = np.outer(v, v)
    L, info = factorize(G)
    assert info["method"] != "cholesky"
    assert np.allclose(L @ L.T, G, atol=1e-8)
    with pytest.raises(ValueError):
        factorize(np.diag([1.0, -1.0]))


def test_monte_carlo_moments():
    rep, draws = simulate_report(cv.brownian(), sp.white(1), 1.0, 2.0**-7, 4000, seed=3)
    M = rep.values["gram_second_moment"]
    assert abs(draws.mean()) <= 3 * math.sqrt(M / 4000)
    assert abs(rep.values["sample_variance"] - M) <= 3 * rep.values["variance_se"]
    assert rep.verdict == "PASS"


def test_seed_determinism_across_threads():
    g = build_gram(cv.fbm(0.7), sp.white(1), WZGrid(1.0, 2.0**-6))
    a = sample_wz(g, 11, 300, threads=1)
    b = sample_wz(g, 11, 300, threads=4)
    c = sample_wz(g, 12, 300, threads=1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_convergence_brownian_white():
    rep = convergence_study(cv.brownian(), sp.white(1), 1.0)
    assert rep.values["cauchy_decreasing"]
    assert rep.values["moments_approach_target"]
    assert rep.verdict == "PASS"


def test_convergence_fbm_riesz():
    rep = convergence_study(cv.fbm(0.7), sp.riesz(2, 1.0), 1.0, eps_list=2.0 ** -np.arange(4, 10))
    assert rep.values["existence"]
    assert rep.values["cauchy_decreasing"]
    assert rep.verdict != "DIVERGENT"


def test_convergence_divergent():
    rep = convergence_study(cv.brownian(), sp.riesz(2, 2.5), 1.0, eps_list=2.0 ** -np.arange(4, 9))
    assert rep.verdict == "DIVERGENT"


def test_burn_in_validation():
    with pytest.raises(ValueError):
        convergence_study(cv.brownian(), sp.white(1), 1.0, eps_list=[0.1, 0.05, 0.02], burn_in=1)


@pytest.mark.xfail(strict=True, reason="unattainable: the eps^(1/3) cutoff leaves a 31% gap at eps=2^-10; "
                                       "see the decisions ledger")
def test_second_moment_within_one_percent():
    M = discrete_second_moment(build_gram(cv.brownian(), sp.white(1), WZGrid(1.0, 2.0**-10)))
    assert M == pytest.approx(1 / math.sqrt(math.pi), rel=0.01)
