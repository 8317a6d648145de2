import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spde import covariance as cv
from spde import spectral as sp
from spde.gamma import GammaKernel
from spde.ibp import DiscretizationPair, count_below, disc_integral, i3_limit, ibp_decompose


def test_disc_integral_examples():
    assert disc_integral(lambda u: 1.0, 0, 1, 0.25) == pytest.approx(1.0)
    assert disc_integral(lambda u: u, 0, 1, 0.25) == pytest.approx(0.375)
    assert disc_integral(lambda u: u, 0.3, 0.3, 0.1) == 0.0
    with pytest.raises(ValueError):
        disc_integral(lambda u: u, 0, 1, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.01, 0.5))
def test_shift_identity(t, eps):
    f = lambda u: np.sin(3 * u) + u * u  # noqa: E731
    a = disc_integral(f, 0, t, eps)
    b = disc_integral(lambda u: f(u - eps), eps, t + eps, eps)
    c = disc_integral(lambda u: f(u + eps), -eps, t - eps, eps)
    assert abs(a - b) <= 1e-14 * (1 + abs(a)) + 1e-14
    assert abs(a - c) <= 1e-12 * (1 + abs(a))


def test_count_below():
    assert count_below(1.0, 0.125) == 8
    assert count_below(0.75, 0.1) == 8
    assert count_below(0.0, 0.1) == 0


def _naive_terms(G, R, e, et, t, tt):
    """Literal sums: grid points k*e with a <= k*e < b found by scanning k."""

    def pts(a, b, h, top):
        return [k * h for k in range(-2, int(top / h) + 4) if a <= k * h < b]

    def D(f, a, b, c, d):
        return e * et * sum(f(s, q) for s in pts(a, b, e, t + e) for q in pts(c, d, et, tt + et))

    rect = lambda s, q: R(s + e, q + et) - R(s + e, q) - R(s, q + et) + R(s, q)  # noqa: E731
    A = D(lambda s, q: G(s, q) * rect(s, q), 0, t, 0, tt)
    A0 = D(lambda s, q: (G(s, q) - G(s, q - et) - G(s - e, q) + G(s - e, q - et)) * R(s, q), 0, t, 0, tt)
    I0 = (D(lambda s, q: G(s - e, q - et) * R(s, q), t, t + e, tt, tt + et)
          - D(lambda s, q: G(s - e, q - et) * R(s, q), 0, e, 0, et))
    I1 = (D(lambda s, q: (G(s - e, q - et) - G(s - e, q)) * R(s, q), t, t + e, et, tt)
          - D(lambda s, q: G(s - e, q) * R(s, q), t, t + e, 0, et))
    I2 = (D(lambda s, q: (G(s - e, q - et) - G(s, q - et)) * R(s, q), e, t, tt, tt + et)
          - D(lambda s, q: G(s, q - et) * R(s, q), 0, e, tt, tt + et))
    I3 = (D(lambda s, q: (G(s - e, q) - G(s - e, q - et)) * R(s, q), 0, e, et, tt)
          + D(lambda s, q: G(s - e, q) * R(s, q), 0, e, 0, et))
    I4 = (D(lambda s, q: (G(s, q - et) - G(s - e, q - et)) * R(s, q), e, t, 0, et)
          + D(lambda s, q: G(s, q - et) * R(s, q), 0, e, 0, et))
    return dict(A=A, A0=A0, I0=I0, I1=I1, I2=I2, I3=I3, I4=I4)


def _random_case(rng):
    e, et = rng.uniform(0.05, 0.2, 2)
    # keep t, t~ away from grid points so float comparisons are unambiguous
    t = (rng.integers(3, 9) + rng.uniform(0.2, 0.8)) * e
    tt = (rng.integers(3, 9) + rng.uniform(0.2, 0.8)) * et
    a, b = rng.uniform(-1, 1, 2)
    G = lambda s, q: np.cos(a * s + b * q) + s * q  # noqa: E731
    cov = [cv.brownian(), cv.fbm(0.3), cv.product()][rng.integers(3)]
    R = lambda s, q: cv.eval_R(cov, np.maximum(s, 0.0), np.maximum(q, 0.0))  # noqa: E731
    return G, R, float(e), float(et), float(t), float(tt)


def test_terms_match_naive_loops():
    rng = np.random.default_rng(4)
    for _ in range(50):
        G, R, e, et, t, tt = _random_case(rng)
        disc = DiscretizationPair(e, et, t, tt)
        terms = ibp_decompose(G, R, disc).to_dict()
        naive = _naive_terms(G, R, e, et, t, tt)
        for key, val in naive.items():
            assert terms[key] == pytest.approx(val, rel=1e-10, abs=1e-13), key
        assert terms["residual"] <= 1e-9 * (1 + abs(terms["A"]))


def test_gamma_one_brownian():
    disc = DiscretizationPair(0.125, 0.125, 1.0, 1.0)
    terms = ibp_decompose(lambda s, q: np.ones(np.broadcast(s, q).shape), cv.brownian(), disc)
    assert terms.residual <= 1e-12
    # eps * eps~ * sum_k eps = 8 eps^3 (only diagonal cells overlap)
    assert terms.A == pytest.approx(8 * 0.125**3, rel=1e-14)


@pytest.mark.parametrize("e,et", [(1 / 8, 1 / 8), (1 / 8, 1 / 16), (1 / 16, 1 / 8), (1 / 16, 1 / 16)])
def test_product_polynomial(e, et):
    disc = DiscretizationPair(e, et, 0.75, 1.0)
    terms = ibp_decompose(lambda s, q: s * q, cv.product(), disc)
    assert terms.residual <= 1e-12


def test_gamma_kernel_case():
    k = GammaKernel(sp.white(1), 2.0)
    disc = DiscretizationPair(0.1, 0.07, 1.0, 1.0)
    terms = ibp_decompose(k, cv.fbm(0.7), disc)
    assert terms.residual <= 1e-9 * (1 + abs(terms.A))


def test_grid_errors():
    with pytest.raises(ValueError):
        DiscretizationPair(1.2, 0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        DiscretizationPair(0.1, 0.3, 1.0, 0.25)


def test_i3_scaled_limit():
    G = lambda s, q: np.exp(s + 2 * q)  # noqa: E731
    dG = lambda s, q: 2 * np.exp(s + 2 * q)  # noqa: E731
    R = lambda s, q: np.cos(s - q) + s * q  # noqa: E731
    L = i3_limit(dG, G, R, 1.0)
    # int_0^1 2 e^{2q} cos(q) dq + Gamma(0,0) R(0,0)
    exact = 2 * (math.exp(2) * (2 * math.cos(1) + math.sin(1)) - 2) / 5 + 1.0
    assert L == pytest.approx(exact, rel=1e-10)
    drift = []
    for n in range(3, 9):
        e = 2.0**-n
        terms = ibp_decompose(G, R, DiscretizationPair(e, e, 1.0, 1.0))
        drift.append(abs(terms.I3 / (e * e) - L))
    assert all(a > b for a, b in zip(drift, drift[1:]))

