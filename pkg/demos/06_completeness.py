"""Completeness of the conformally rescaled fiber metric.

With the two pole sections deleted, the fiber of the twistor space is an
open sphere and the weight e^{h} decides completeness of the rescaled
metric: the criterion is divergence of integral e^{h(lat)/2} d(lat) toward
each pole.  For h_p = -p log(1 - zeta^2) the integrand is cos(lat)^{-p},
so p >= 1 is complete (p = 1 diverges logarithmically, like log|sec+tan|)
and p < 1 is not -- in particular the unweighted metric (p = 0) on the
doubly-punctured twistor space is incomplete.
"""

import numpy as np

from twistorcheck import fibermap as fm

print("closed-form classification of h_p = -p log(1 - z^2):")
for p in (0.0, 0.5, 0.9, 1.0, 1.1, 2.0):
    v = fm.completeness_classify("power_pole", p=p)
    print(f"  p = {p:4.2f}  ->  {v.verdict}")

print("\nsame family through the generic exponent-fitting route:")
for p in (0.0, 0.5, 1.5, 2.0):
    v = fm.completeness_classify("expression",
                                 h_expr=lambda z, p=p: -p * np.log(1.0 - z * z))
    north = v.detail["north"]["partial_integral"]
    print(f"  p = {p:4.2f}  ->  {v.verdict:12s} fitted exponent {v.fitted_exponent:+.3f}, "
          f"partial integral toward the pole {north:9.3f}")

print("\nnear the critical exponent the fit refuses to guess:")
v = fm.completeness_classify("expression", h_expr=lambda z: -1.02 * np.log(1.0 - z * z))
print(f"  p = 1.02 ->  {v.verdict} (fitted {v.fitted_exponent:.3f})")
