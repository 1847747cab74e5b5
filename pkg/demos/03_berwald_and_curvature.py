"""Berwald test and curvature on three backgrounds.

A constant potential on flat space and a static potential on a curved
static metric are both Berwald; a spatially varying potential is not.  For
the Berwald cases the Einstein tensor has vanishing horizontal divergence.
"""

import numpy as np

from fingeo import curvature as cv
from fingeo import spray as sp
from fingeo.scenario import load_scenario

for name in ("flat_constant_A", "berwald_curved", "coupled_weakfield"):
    scn = load_scenario(name)
    (x, y), = scn.probe_points(1)
    br = sp.berwald_report(scn.background, (x, y))
    Ric, Ric2 = cv.ricci_scalars(scn.background, (x, y))
    print(f"{name}: is_berwald={br.is_berwald}  max|B_j|k|={np.abs(br.B_cov).max():.3e}")
    print(f"    Ric (spray) = {Ric:+.6e}   Ric (y R y) = {Ric2:+.6e}")
    if br.is_berwald:
        d = cv.divergence_probe(scn.background, (x, y))
        print(f"    |div Einstein| = {np.abs(d.div_Einstein_h).max():.2e}  "
              f"(|Einstein| = {d.einstein_norm:.2e})")
