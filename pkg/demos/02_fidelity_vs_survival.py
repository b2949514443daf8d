"""Fidelity and survival of a wavepacket at one perturbation strength.

The survival amplitude of a wavepacket also decays through its own energy
spread, so it falls much faster than the fidelity.  Both curves are fitted
with the exponential and Gaussian families.
"""

import numpy as np

from loschmidt import evolve, fit_decay, make_wavepacket, synthetic_model

model = synthetic_model(600, 1.0, strength=10.0, gamma_cl=40.0, seed=3)
packet = make_wavepacket(model.levels, float(model.levels.energies[300]), 10.0, seed=4)
dx = 0.4
horizons = {"fidelity": 6.0, "survival": 0.6}

for kind, t_max in horizons.items():
    t = np.linspace(0.0, t_max, 600)
    curve = evolve(model, dx, packet, t, kind=kind)
    print(f"{kind}: plateau {curve.plateau:.4f}")
    for family in ("exponential", "gaussian"):
        fit = fit_decay(curve, family)
        print(f"  {family:<12} rate {fit.rate:8.3f}  rms log residual {fit.rms_log_residual:.4f}"
              f"  [{fit.flag}]")
    print("  samples:", np.round(curve.probabilities[::60], 3))
