"""How the LDOS spreads as the perturbation grows.

Builds a banded g = 0 model and prints, for a range of dx, the core width,
the mean participation ratio and the weight left on the original level.
The three columns show the crossover from a Kronecker delta (width well
below the level spacing) to a broad Wigner-like distribution.
"""

import numpy as np

from loschmidt import averaged_ldos, core_width, diagonalize, synthetic_model
from loschmidt.analysis import kronecker_weight
from loschmidt.spectral import eigenstate_ldos, participation_ratio, reference_indices

model = synthetic_model(600, 0.0, strength=1.0, bandwidth=120.0, gamma_cl=40.0, seed=1)
refs = reference_indices(model.n, 30)

print(f"{'dx':>7} {'Gamma':>8} {'PR':>8} {'weight on ref':>14}")
for dx in np.geomspace(0.05, 5.0, 9):
    dec = diagonalize(model, dx)
    width = core_width(averaged_ldos(model, dx, refs, decomposition=dec))
    pr = np.mean([participation_ratio(eigenstate_ldos(model, dx, r, dec)) for r in refs])
    print(f"{dx:7.3f} {width:8.3f} {pr:8.2f} {kronecker_weight(model, dx, refs, dec):14.3f}")
