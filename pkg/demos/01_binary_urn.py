"""
Protected nodes in random binary search trees
=============================================

Build the five-type small-tree urn, look at its mean matrix and spectrum,
and compute the covariance of the normal limit by both routes.
"""
from mstpolya import asymptotic_law, asymptotics_dual_basis, asymptotics_integral, functional_law, protected_urn, spectral
from mstpolya.ratlinalg import format_rational

bundle = protected_urn(2)
spec = bundle.spec
print("types:", ", ".join(spec.labels))
print("activities:", [format_rational(a) for a in spec.activities])

# spectrum, exact
sd = spectral(spec)
print("eigenvalues:", [format_rational(e.exact) for e in sd.eigenvalues])
print("v1:", [format_rational(x) for x in sd.v1])
print("diagonalisable:", sd.diagonalizable)

# two independent covariance computations
lyap = asymptotics_integral(spec, sd)
dual = asymptotics_dual_basis(spec, sd)
print("routes agree exactly:", lyap.sigma == dual.sigma)
for row in lyap.sigma.to_strings():
    print("  ", " ".join(f"{x:>10}" for x in row))

mean, var = functional_law(asymptotic_law(spec, sd), bundle.functionals["protected"])
print(f"protected nodes: mean {format_rational(mean)} n, variance {format_rational(var)} n")
