"""
Simulated trees against the limit laws
======================================

Grow random trees with the compiled simulator, compare with the exact
small-n law and with the normal approximation.
"""
import math

import numpy as np

from mstpolya import asymptotic_law, functional_law, protected_urn
from mstpolya.simulate import run_mc, simulate_trees
from mstpolya.trees import exact_small_n

# small n: exhaustive law against one million trees
n, trials = 6, 10**6
exact = exact_small_n(2, n, "two_protected")[n]
freq = np.bincount(simulate_trees(2, n, trials, seed=1)[:, 0]) / trials
for k, p in sorted(exact.pmf.items()):
    print(f"P(Z_{n} = {k}) = {str(p):>6} = {float(p):.5f}   simulated {freq[k]:.5f}")

# large n: mean and variance rates
b = protected_urn(3)
mu, var = functional_law(asymptotic_law(b.spec), b.functionals["protected"])
n, trials = 20_000, 400
res = run_mc("tree", 3, n, trials, seed=1, statistics=("two_protected",))["two_protected"]
z = (res.mean - float(mu) * n) / math.sqrt(float(var) * n / trials)
print(f"m=3, n={n}: mean/n {res.mean / n:.5f} vs {float(mu):.5f} (z = {z:+.2f}), "
      f"Var/n {res.variance / n:.5f} vs {float(var):.5f}")
print(f"skewness {res.skewness:+.3f}, excess kurtosis {res.excess_kurtosis:+.3f}")
