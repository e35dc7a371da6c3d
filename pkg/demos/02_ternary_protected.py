"""
Protected nodes in ternary search trees
=======================================

Nineteen small-tree types, a mean matrix that is not diagonalisable, and an
exact covariance obtained from a rational Lyapunov solve.
"""
import time

from mstpolya import asymptotic_law, functional_law, protected_urn, spectral
from mstpolya.ratlinalg import format_rational

bundle = protected_urn(3)
t0 = time.perf_counter()
sd = spectral(bundle.spec)
print("eigenvalues:", " ".join(format_rational(e.exact) for e in sd.eigenvalues))
print("diagonalisable:", sd.diagonalizable)

law = asymptotic_law(bundle.spec, sd)
print("method:", law.method, "| exact:", law.exact, f"| {time.perf_counter() - t0:.2f}s")

for name in ("protected", "leaves", "leaves_with_1_keys", "leaves_with_2_keys"):
    mean, var = functional_law(law, bundle.functionals[name])
    print(f"{name:>20}: mean {format_rational(mean):>6} n   variance {format_rational(var)} n")

# float route for comparison
approx = asymptotic_law(bundle.spec, precision="float")
print("max |exact - float| in Sigma:", abs(law.sigma_float() - approx.sigma_float()).max())
