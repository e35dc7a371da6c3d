"""
Where asymptotic normality stops
================================

The node urn has characteristic polynomial prod_{i<m}(x+i) - m!.  Its
second root crosses the line Re = 1/2 between m = 26 and m = 27.
"""
import numpy as np

from mstpolya import ratlinalg as rl
from mstpolya.models import lemma_root_check, protected_mean_matrix, spectral_condition

for m in range(20, 31):
    sc = spectral_condition(m)
    flag = "normal" if sc["holds"] else "NOT normal"
    print(f"m={m:2d}  Re lambda2 = {sc['lambda2_re']:.6f}  {flag}")

# the full small-tree urns contain these roots and add nothing above 1/2
for m in (4, 5, 6):
    A = protected_mean_matrix(m)
    vals = np.array(rl.numeric_eigen(A, check=False))
    rest = np.delete(vals, np.argmin(abs(vals - 1)))
    print(f"m={m}: {A.shape[0]} types, largest non-Perron real part {rest.real.max():.3g}")

rep = lemma_root_check(4)
print("gap map identity:", rep["identity_holds"], "| roots certified:", rep["certified"])
