import math

from spde import covariance, spectral
from spde.variance import isometry_variance, variance_exact


# --- Which spectral measures give a function-valued solution? ---
# Brownian time has increment exponent beta' = 1, so the measure needs
# int (1 + |xi|^2)^{-1} mu(d xi) < inf.  Riesz kernels in d = 2 cross over at eta = 2.
bm = covariance.brownian()
for eta in (1.0, 1.9, 2.1, 2.5):
    v = spectral.existence_verdict(spectral.riesz(2, eta), bm).values
    print(f"riesz d=2 eta={eta}: exists={v['exists']}  analytic/numeric agree={v['verdicts_agree']}")

# rougher time noise needs a smoother measure
print("white d=1, fBm H0=0.3:", spectral.existence_verdict(spectral.white(1), covariance.fbm(0.3)).values["exists"])


# --- Second moment of the solution ---
# With Brownian time the answer is known in closed form for white noise: sqrt(t/pi).
for t in (0.25, 1.0):
    vb = variance_exact(bm, spectral.white(1), t)
    print(f"t={t}: four-term value {vb.total:.7f}, sqrt(t/pi) = {math.sqrt(t / math.pi):.7f}")

m = spectral.riesz(2, 1.0)
print("riesz eta=1, d=2:", variance_exact(bm, m, 1.0).total, "vs isometry", isometry_variance(m, 1.0))

# a smoother time covariance; no closed form, the four terms are reported separately
vb = variance_exact(covariance.fbm(0.7), m, 1.0)
print("fBm H0=0.7:", vb.to_dict())

# past the threshold the dyadic levels stop decaying and the value is flagged
print("riesz eta=2.5:", variance_exact(bm, spectral.riesz(2, 2.5), 1.0).divergent)
