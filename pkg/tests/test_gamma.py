import math
import warnings

import numpy as np
import pytest
from scipy import integrate

from spde import spectral as sp
from spde.gamma import GammaKernel, MomentTable, gamma, gamma_partial, moment


def lebesgue(dim=1):
    return sp.custom(lambda xi: np.ones(np.shape(xi)[:-1]), dim, radial=True,
                     profile=lambda r: np.ones(np.shape(r)))


def test_lebesgue_values():
    k = GammaKernel(lebesgue(), 1.0)
    assert float(gamma(k, 0, 0)) == pytest.approx(math.sqrt(math.pi), rel=1e-9)
    assert float(gamma_partial(k, 0, 0, "Ds")) == pytest.approx(math.sqrt(math.pi) / 4, rel=1e-9)
    assert float(gamma_partial(k, 0, 0, "DsDsp")) == pytest.approx(3 * math.sqrt(math.pi) / 16, rel=1e-9)


def test_white_value():
    k = GammaKernel(sp.white(1), 1.0)
    assert float(gamma(k, 0, 0)) == pytest.approx(0.2820948, abs=1e-7)


@pytest.mark.parametrize("m", [sp.white(2), sp.riesz(2, 1.0), sp.bessel(1, 1.5), sp.bessel(3, 0.7),
                               sp.fracprod([0.7, 0.4])])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_moment_against_direct_quadrature(m, k):
    a = 0.37
    A = sp.angular_constant(m)

    def f(r):
        return A * (0.5 * r * r) ** k * math.exp(-0.5 * a * r * r) * float(sp.radial_profile(m, r)) * r ** (m.dim - 1)

    ref, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=400)
    assert float(moment(m, k, a)) == pytest.approx(ref, rel=1e-8)


def test_fracprod_full_tensor_oracle():
    # 2-d product density |x|^{-0.4}|y|^{0.2} integrated against exp(-a|xi|^2/2) in Cartesian form
    m = sp.fracprod([0.7, 0.4])
    a = 0.8
    gx = math.gamma((1 - 0.4) / 2) * (2 / a) ** ((1 - 0.4) / 2)
    gy = math.gamma((1 + 0.2) / 2) * (2 / a) ** ((1 + 0.2) / 2)
    assert float(moment(m, 0, a)) == pytest.approx(gx * gy, rel=1e-10)


def test_symmetry_and_monotonicity():
    rng = np.random.default_rng(3)
    for m in (sp.white(1), sp.riesz(2, 1.0), sp.bessel(1, 1.5)):
        k = GammaKernel(m, 1.0)
        s, t = rng.uniform(0, 0.99, (2, 30))
        assert np.allclose(gamma(k, s, t), gamma(k, t, s), rtol=0, atol=1e-10)
        g = np.linspace(0, 0.95, 20)
        for order in (None, "Ds", "DsDsp", "D2sDsp"):
            vals = gamma(k, g, 0.3) if order is None else gamma_partial(k, g, 0.3, order)
            assert np.all(np.diff(vals) >= 0)


def test_ds_equals_dsp():
    k = GammaKernel(sp.bessel(2, 1.0), 1.0)
    s, t = 0.2, 0.55
    a = float(gamma_partial(k, s, t, "Ds"))
    b = float(gamma_partial(k, t, s, "Ds"))
    assert a == pytest.approx(b, rel=1e-8)


def test_finite_differences_h_1e4():
    rng = np.random.default_rng(9)
    h = 1e-4
    for m in (sp.white(1), sp.riesz(2, 1.0), sp.bessel(1, 1.5)):
        k = GammaKernel(m, 1.0)
        for s, t in rng.uniform(0.05, 0.8, (7, 2)):
            d = float(gamma_partial(k, s, t, "Ds"))
            fd = (float(gamma(k, s + h, t)) - float(gamma(k, s - h, t))) / (2 * h)
            assert abs(d - fd) <= 1e-5 * (1 + abs(d))


def test_domain_errors():
    k = GammaKernel(sp.white(1), 1.0)
    with pytest.raises(ValueError):
        gamma_partial(k, 1.0, 0.2, "Ds")
    with pytest.raises(ValueError):
        gamma_partial(k, 0.2, 0.2, "D3s")
    with pytest.raises(ValueError):
        gamma(k, -0.1, 0.2)
    with pytest.raises(ValueError):
        gamma(k, 1.0 - 1e-14, 1.0)


def test_corner_infinite_mass():
    k = GammaKernel(sp.white(1), 1.0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        v = float(gamma(k, 1.0, 1.0))
    assert v == math.inf and w


def test_corner_finite_mass():
    m = sp.custom(lambda xi: np.exp(-np.sum(xi**2, -1)), 1, radial=True,
                  profile=lambda r: np.exp(-np.asarray(r) ** 2), tail_exponent=50.0)
    k = GammaKernel(m, 1.0)
    assert float(gamma(k, 1.0, 1.0)) == pytest.approx(math.sqrt(math.pi), rel=1e-8)


def test_kernel_extends_below_zero():
    k = GammaKernel(sp.white(1), 1.0)
    assert float(k(-0.1, -0.1)) == pytest.approx(float(moment(sp.white(1), 0, 2.2)))


def test_moment_table_accuracy():
    m = sp.bessel(1, 1.5)
    tab = MomentTable(m, 2, 1e-6, 2.0)
    a = np.logspace(-5.5, 0.2, 23)
    assert np.allclose(tab(a), moment(m, 2, a), rtol=1e-7)
    with pytest.raises(ValueError):
        tab(5.0)


def test_compact_support():
    m = sp.custom(lambda xi: np.ones(np.shape(xi)[:-1]), 1, radial=True,
                  profile=lambda r: np.ones(np.shape(r)), support_radius=1.0)
    ref, _ = integrate.quad(lambda x: math.exp(-0.25 * x * x), -1, 1)
    assert float(moment(m, 0, 0.5)) == pytest.approx(ref, rel=1e-12)
