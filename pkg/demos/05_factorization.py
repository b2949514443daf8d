"""Spectral weights of the fidelity over sign-randomized realizations.

For each realization the fidelity amplitude is a sum of complex weights
f over frequencies.  Binned over 50 realizations, the mean square weight
should match the product of the wavepacket autoconvolution and the
perturbed LDOS.  The mean weight stays positive, because its expectation
is a product of squared overlaps.
"""

import numpy as np

from loschmidt import (LdosDistribution, averaged_ldos, core_width, diagonalize,
                       effective_ldos, factorization_diagnostic, make_wavepacket,
                       randomized_partner, synthetic_model, wavepacket_ldos)
from loschmidt.analysis import shell_references

model = synthetic_model(400, 1.0, strength=10.0, bandwidth=10.0, gamma_cl=40.0, seed=2001)
packet = make_wavepacket(model.levels, float(model.levels.energies[200]), 20.0, seed=9)
refs = shell_references(model, packet)
dx, h = 1.0, 1.0

sets, offsets, weights = [], [], []
partners = [randomized_partner(model, 100 + j) for j in range(50)]
for p in partners:
    dec = diagonalize(p, dx)
    sets.append(effective_ldos(p, dx, packet, dec))
    d = averaged_ldos(p, dx, refs, h, decomposition=dec)
    offsets.append(d.offsets)
    weights.append(d.weights / len(partners))
pooled = LdosDistribution(np.concatenate(offsets), np.concatenate(weights), 0.0, "averaged", dx)
fd = factorization_diagnostic(sets, wavepacket_ldos(model, packet), pooled, h,
                              model.levels.mean_spacing)

central = fd.central(max(core_width(pooled) / 2, h))
z_re, _ = fd.z_scores()
print(f"{'omega':>6} {'ratio':>7} {'z(mean)':>8}")
for w, r, z in zip(fd.centers[central], fd.ratio[central], z_re[central]):
    print(f"{w:6.1f} {r:7.3f} {z:8.1f}")
