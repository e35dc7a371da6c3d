"""
Leaves and one-protected nodes for general m
============================================

Small gap urns give the leaf and one-protected laws for any arity; the
closed-form means come out of the harmonic numbers.
"""
from mstpolya import asymptotic_law, closed_forms, functional_law, leaves_gap_urn, oneprotected_urn
from mstpolya.ratlinalg import format_rational

print(" m |   mu_L   sigma2_L           |   mu_Q   sigma2_Q")
for m in range(3, 9):
    g = leaves_gap_urn(m)
    o = oneprotected_urn(m)
    law_g = asymptotic_law(g.spec)
    law_o = asymptotic_law(o.spec)
    mL, vL = functional_law(law_g, g.functionals["leaves"])
    mQ, vQ = functional_law(law_o, o.functionals["one_protected"])
    # the second urn gives the same leaf law
    assert functional_law(law_o, o.functionals["leaves"]) == (mL, vL)
    cf = closed_forms(m)
    assert (cf["mu_L"], cf["mu_Q"]) == (mL, mQ)
    print(f"{m:2d} | {format_rational(mL):>7}  {format_rational(vL):<18} | {format_rational(mQ):>7}  {format_rational(vQ)}")

law2 = asymptotic_law(oneprotected_urn(2).spec)
print("binary one-protected covariance:", law2.sigma.to_strings())
