import math

import numpy as np

from spde import besov, covariance, spectral


# --- Littlewood-Paley blocks on a periodic grid ---
p = besov.build_partition(1024, 32.0, 1)
g = p.grid
print("blocks j = -1 ..", p.j_max, " partition error", np.max(np.abs(p.chi + sum(p.phi_j) - 1)))

# a single Fourier mode lives in at most two neighbouring blocks
f = besov.GridField(np.cos(2 * math.pi * 40 * g.x_axis / g.L), g)
print([round(float(np.abs(besov.dyadic_block(f, p, j).values).max()), 3) for j in range(-1, p.j_max + 1)])


# --- Noise increments scale like the time covariance ---
# For fBm time the mean squared Besov norm of dW_{s,s+h} grows like h^{2 H0}.
bp = besov.BesovParams(kappa=-0.6, q=1)
for H0 in (0.4, 0.8):
    rep = besov.noise_scaling_study(covariance.fbm(H0), spectral.white(1), g, bp,
                                    np.logspace(-3, -0.5, 9), s0=0.1, n_rep=100, seed=5,
                                    expected_slope=2 * H0)
    print(f"H0={H0}: slope {rep.values['slope']:.3f} (expected {2 * H0})")


# --- Dyadic scheme and time regularity ---
cov = covariance.fbm(0.8)
rep = besov.cauchy_decay_study(cov, spectral.white(1), range(2, 8), 1.0, g, besov.BesovParams(0.2),
                               n_rep=30, seed=9)
print("Cauchy decay rate theta =", round(rep.values["theta"], 3))

times = [0.5 + k / 32 for k in range(9)]
rep = besov.holder_estimate(cov, spectral.white(1), 6, times, g, besov.BesovParams(0.2), seed=1,
                            n_rep=20, beta_measure=0.55)
print("time exponent", round(rep.values["exponent"], 3), "theory", rep.values["theory_exponent"])
