import math

import numpy as np

from spde import covariance, spectral
from spde.sampler import WZGrid, build_gram, convergence_study, discrete_second_moment, sample_wz


bm, white = covariance.brownian(), spectral.white(1)

# --- Exact second moments of the smoothed scheme ---
# The scheme sums frozen-kernel increments up to t - eps^(1/3), so for small eps
# the second moment approaches sqrt(1/pi) - sqrt(eps^(1/3)/pi), not sqrt(1/pi).
for n in range(4, 11):
    eps = 2.0**-n
    M = discrete_second_moment(build_gram(bm, white, WZGrid(1.0, eps)))
    pred = (1 - eps ** (1 / 6)) / math.sqrt(math.pi)
    print(f"eps=2^-{n}: M={M:.5f}  cutoff prediction {pred:.5f}  target {1 / math.sqrt(math.pi):.5f}")


# --- Cauchy quantities between neighbouring eps ---
rep = convergence_study(bm, white, 1.0, n_rep=2000, seed=42)
for row in rep.tables["cauchy"]:
    print(f"eps={row['eps']:.5f} -> {row['eps_next']:.5f}: E(u - u')^2 = {row['cauchy']:.3e}")
print("verdict:", rep.verdict, " MC variance", rep.values["mc_variance"], "+-", rep.values["mc_se"])


# --- Sampling ---
g = build_gram(covariance.fbm(0.7), spectral.riesz(2, 1.0), WZGrid(1.0, 2.0**-7))
draws = sample_wz(g, seed=1, n_rep=5000, threads=4)
print("fBm/riesz: sample var", np.var(draws, ddof=1), "gram sum", discrete_second_moment(g))
