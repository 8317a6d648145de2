import math

import numpy as np
import pytest

from spde import besov as b
from spde import covariance as cv
from spde import spectral as sp


def test_partition_of_unity():
    r = np.random.default_rng(0).uniform(0, 1e4, 10_000)
    total = b.chi(r) + sum(b.phi(r * 2.0**-j) for j in range(20))
    assert np.max(np.abs(total - 1.0)) <= 1e-12


def test_support_properties():
    r = np.linspace(0, 50, 20001)
    assert np.all(b.phi(r) * b.phi(r / 8) == 0)  # phi_0 and phi_3
    assert np.all(b.chi(r) * b.phi(r / 4) == 0)  # chi and phi_2
    assert np.all(b.chi(r[r <= 0.75]) == 1)
    assert np.all(b.phi(r[(r < 0.75) | (r > 8 / 3)]) == 0)


def test_grid_partition_is_exact():
    for N, L, d in ((1024, 32.0, 1), (64, 8.0, 2)):
        p = b.build_partition(N, L, d)
        s = p.chi + sum(p.phi_j)
        assert np.max(np.abs(s - 1.0)) <= 1e-12
        assert np.all(p.chi * p.phi_j[1] == 0)


def test_coarse_grid_rejected():
    with pytest.raises(ValueError):
        b.build_partition(8, 32.0, 1)
    with pytest.raises(ValueError):
        b.PeriodicGrid(100, 1.0)


def test_single_mode_blocks():
    p = b.build_partition(256, 2 * math.pi, 1)
    g = p.grid
    f = b.GridField(np.cos(9 * g.x_axis), g)  # |xi| = 9 sits in blocks j = 2, 3
    norms = {j: np.max(np.abs(b.dyadic_block(f, p, j).values)) for j in range(-1, p.j_max + 1)}
    live = [j for j, v in norms.items() if v > 1e-12]
    assert set(live) <= {2, 3}
    recon = sum(b.dyadic_block(f, p, j).values for j in range(-1, p.j_max + 1))
    assert np.max(np.abs(recon - f.values)) <= 1e-12
    beyond = b.dyadic_block(f, p, p.j_max + 1)
    assert beyond.provenance["beyond_nyquist"] and not beyond.values.any()


def test_blocks_orthogonal_when_far_apart():
    p = b.build_partition(512, 16.0, 1)
    g = p.grid
    f = b.GridField(np.random.default_rng(1).standard_normal(g.shape), g)
    d1 = b.dyadic_block(f, p, 1)
    d4 = b.dyadic_block(d1, p, 4)
    assert np.max(np.abs(d4.values)) <= 1e-12


def test_norm_basic_properties():
    p = b.build_partition(256, 16.0, 1)
    g = p.grid
    f = b.GridField(np.random.default_rng(2).standard_normal(g.shape), g)
    bp = b.BesovParams(-0.3, q=2)
    assert b.besov_norm(b.GridField(np.zeros(g.shape), g), p, bp) == 0.0
    assert b.besov_norm(f.scaled(-3.0), p, bp) == pytest.approx(3 * b.besov_norm(f, p, bp), rel=1e-12)
    ks = [-1.0, -0.5, 0.0, 0.5]
    vals = [b.besov_norm(f, p, b.BesovParams(k)) for k in ks]
    assert all(x < y for x, y in zip(vals, vals[1:]))


def test_besov_params_validation():
    with pytest.raises(ValueError):
        b.BesovParams(0.0, q=0)
    with pytest.raises(ValueError):
        b.BesovParams(0.0, sigma=1.0).weight_exponent(1)


def test_heat_semigroup():
    g = b.PeriodicGrid(128, 2 * math.pi)
    f = b.GridField(np.cos(2 * g.x_axis), g)
    assert np.array_equal(b.heat_apply(f, 0.0).values, f.values)
    assert np.allclose(b.heat_apply(f, 0.3).values, math.exp(-0.6) * f.values, atol=1e-12)
    h = b.GridField(np.random.default_rng(3).standard_normal(g.shape), g)
    two = b.heat_apply(b.heat_apply(h, 0.1), 0.2).values
    assert np.allclose(two, b.heat_apply(h, 0.3).values, atol=1e-12)
    assert np.linalg.norm(b.heat_apply(h, 0.5).values) <= np.linalg.norm(h.values)
    with pytest.raises(ValueError):
        b.heat_apply(h, -1.0)


def test_noise_pointwise_variance():
    g = b.PeriodicGrid(128, 16.0)
    m = sp.white(1)
    cov = cv.fbm(0.7)
    s, t = 0.2, 0.5
    draws = np.stack([b.sample_noise_field(cov, m, s, t, g, seed=4, replicate=r).values for r in range(500)])
    emp = float(np.mean(draws**2))
    rect = float(cv.rect_increment(cov, s, t, s, t))
    assert emp == pytest.approx(rect * b.cell_masses(m, g).sum(), rel=0.05)


def test_cell_masses_white_and_singular():
    g = b.PeriodicGrid(64, 8.0)
    cm = b.cell_masses(sp.white(1), g)
    assert np.allclose(cm, (2 * math.pi / 8.0) / (2 * math.pi))
    cr = b.cell_masses(sp.riesz(1, 0.5), g)
    assert np.all(np.isfinite(cr)) and cr[0] > 0


def test_noise_reproducible():
    g = b.PeriodicGrid(64, 8.0, 2)
    m = sp.riesz(2, 1.0)
    a = b.sample_noise_field(cv.brownian(), m, 0, 1, g, seed=7).values
    c = b.sample_noise_field(cv.brownian(), m, 0, 1, g, seed=7).values
    d = b.sample_noise_field(cv.brownian(), m, 0, 1, g, seed=7, replicate=1).values
    assert np.array_equal(a, c) and not np.array_equal(a, d)
    with pytest.raises(ValueError):
        b.sample_noise_field(cv.brownian(), sp.white(1), 0, 1, g, seed=7)


def test_noise_scaling_brownian():
    g = b.PeriodicGrid(256, 16.0)
    rep = b.noise_scaling_study(cv.brownian(), sp.white(1), g, b.BesovParams(-0.6), np.logspace(-3, -0.5, 6),
                                s0=0.1, n_rep=60, seed=2)
    assert rep.values["slope"] == pytest.approx(1.0, abs=0.1)
    assert rep.values["max_ratio_to_rect"] / rep.values["min_ratio_to_rect"] < 1.5


def test_smoothing_rates():
    p = b.build_partition(512, 16.0)
    g = p.grid
    fields = [b.sample_noise_field(cv.brownian(), sp.white(1), 0, 1, g, seed=1, replicate=r) for r in range(20)]
    rep = b.smoothing_rate_check(fields, p, alpha=-0.6, eta=0.2, tau_list=np.logspace(-2.5, -0.5, 8))
    assert rep.values["slope"] == pytest.approx(-0.4, abs=0.15)
    with pytest.raises(ValueError):
        b.smoothing_rate_check(fields, p, alpha=0.3, eta=0.2, tau_list=[0.1, 0.2, 0.3, 0.4])


def test_smoothing_complement_smooth_mode():
    p = b.build_partition(256, 16.0)
    g = p.grid
    f = b.GridField(np.cos(4 * math.pi * g.x_axis / 16.0), g)
    rep = b.smoothing_rate_check(f, p, alpha=-0.6, eta=0.2, tau_list=np.logspace(-2.5, -0.5, 8), kappa=1.4)
    assert rep.values["complement_slope"] == pytest.approx(1.0, abs=0.05)


def test_dyadic_single_term():
    # n = 0, t = 0.75: only t_0 = 0 lies below t, and the single increment is dW_{0,1}
    g = b.PeriodicGrid(64, 8.0)
    u = b.dyadic_solution(cv.brownian(), sp.white(1), 0, 0.75, g, seed=3)
    inc = b.sample_noise_family(cv.brownian(), sp.white(1), [0.0], [1.0], g, seed=3)[0]
    ref = b.heat_apply(b.GridField(inc, g), 0.75).values
    assert np.allclose(u.values, ref, atol=1e-12)


def test_dyadic_zero_noise_and_refinement_consistency():
    g = b.PeriodicGrid(64, 8.0)
    u = b.dyadic_solution(cv.brownian(), sp.white(1, 0.0), 3, 0.9, g, seed=1)
    assert not u.values.any()
    # the coarse level built from a fine noise path uses the same increments
    a = b.dyadic_solution(cv.brownian(), sp.white(1), 2, 1.0, g, seed=5, n_max=4)
    c = b.dyadic_solution(cv.brownian(), sp.white(1), 4, 1.0, g, seed=5, n_max=4)
    assert a.values.shape == c.values.shape and not np.allclose(a.values, c.values)
    with pytest.raises(ValueError):
        b.dyadic_solution(cv.brownian(), sp.white(1), 5, 1.0, g, seed=5, n_max=4)


def test_cauchy_decay():
    g = b.PeriodicGrid(256, 16.0)
    rep = b.cauchy_decay_study(cv.fbm(0.8), sp.white(1), range(2, 7), 1.0, g, b.BesovParams(0.2), n_rep=20, seed=1)
    assert rep.values["theta"] >= 0.2
    assert rep.verdict == "PASS"


def test_holder_exponent_stable_in_level():
    g = b.PeriodicGrid(256, 16.0)
    times = [0.5, 0.5625, 0.625, 0.75, 1.0]
    ex = []
    for n in (5, 6):
        rep = b.holder_estimate(cv.fbm(0.8), sp.white(1), n, times, g, b.BesovParams(0.2), 1, 40, beta_measure=0.55)
        assert rep.verdict == "PASS" and rep.values["exponent"] > 0
        ex.append(rep.values["exponent"])
    assert abs(ex[0] - ex[1]) <= 0.05


def test_holder_deterministic_forcing():
    g = b.PeriodicGrid(256, 16.0)
    f = b.GridField(np.cos(2 * math.pi * g.x_axis / 16.0), g)
    rep = b.holder_estimate(cv.brownian(), sp.white(1), 6, [0.5, 0.5625, 0.625, 0.75, 1.0], g,
                            b.BesovParams(0.2), 1, 1, forcing=f)
    assert rep.values["exponent"] == pytest.approx(1.0, abs=0.05)
    assert rep.verdict == "COMPUTED"


def test_parseval_on_blocks():
    p = b.build_partition(256, 16.0)
    g = p.grid
    f = np.random.default_rng(5).standard_normal(g.shape)
    blocks = b.all_blocks(f, p)
    F = np.fft.fft(f)
    for j, blk in enumerate(blocks):
        mult = p.chi if j == 0 else p.phi_j[j - 1]
        assert np.sum(blk**2) == pytest.approx(np.sum(np.abs(F * mult) ** 2) / g.N, rel=1e-10, abs=1e-12)
