"""Compare fitted decay rates with the LDOS core width.

Runs a sweep of a g = 0 model and prints gamma * hbar / Gamma per point.
In the golden-rule picture the ratio is one.  The measured ratio sits
near 0.7, because a Lorentzian's 70 % core is about twice its half width.
"""

import numpy as np

from loschmidt import PreparationSpec, scaling_exponent, sweep, synthetic_model

model = synthetic_model(600, 0.0, strength=1.0, bandwidth=120.0, gamma_cl=40.0, seed=5)
result = sweep({"g0": model}, np.geomspace(0.7, 4.0, 8), PreparationSpec(references=20),
               seed=6)["g0"]

print(f"{'dx':>6} {'Gamma':>8} {'gamma':>8} {'ratio':>7}  flag")
for dx, gamma, _, width, _, flag in result.rows():
    print(f"{dx:6.3f} {width:8.3f} {gamma:8.3f} {gamma / width:7.3f}  {flag}")
print(f"log Gamma / log dx slope inside the window: {scaling_exponent(result):.3f}")
