"""Regime borders from a sweep and from closed forms.

The crossing of Gamma with the level spacing gives dx_c.  The non-universal
border dx_NU comes from the closed form k dx = 1, or from the wavelength
2 pi / k for a hard wall.
"""

import numpy as np

from loschmidt import PreparationSpec, estimate_borders, sweep, synthetic_model
from loschmidt.analysis import critical_scaling_exponent

model = synthetic_model(500, 1.0, k=50.0, strength=10.0, gamma_cl=50.0, seed=7)
result = sweep({"m": model}, np.geomspace(0.05, 3.0, 10), PreparationSpec(references=20),
               seed=8)["m"]

for wall in ("soft", "hard"):
    b = estimate_borders(result, wall=wall)
    print(f"{wall} wall:")
    for key, value in b.as_dict().items():
        print(f"  {key:<20} {value}")
for g in (0.0, 1.0):
    print(f"dx_c ~ k^{critical_scaling_exponent(g):.2f} for g = {g}")
