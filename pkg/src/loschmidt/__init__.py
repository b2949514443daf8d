"""Parametric random-matrix models of fidelity decay, survival probability and LDOS widths."""

__version__ = "0.1.0"

from .analysis import (BorderEstimates, FactorizationResult, FitResult, PreparationSpec,
                       SweepResult, estimate_borders, factorization_diagnostic, fit_decay,
                       scaling_exponent, sweep)
from .dynamics import (DecayCurve, SpectralAmplitudeSet, Wavepacket, effective_ldos,
                       ensemble_evolve, evolve, make_wavepacket)
from .errors import (InvalidArgumentError, LoschmidtError, NumericFailure)
from .model import (ParametricModel, build_bandprofile, build_levels, ingest_model,
                    export_model, randomized_partner, sample_perturbation, synthetic_model,
                    transform_perturbation)
from .spectral import (LdosDistribution, averaged_ldos, core_width, diagonalize,
                       eigenstate_ldos, ldos, participation_ratio, wavepacket_ldos)

__all__ = [
    "BorderEstimates", "DecayCurve", "FactorizationResult", "FitResult", "InvalidArgumentError",
    "LdosDistribution", "LoschmidtError", "NumericFailure", "ParametricModel", "PreparationSpec",
    "SpectralAmplitudeSet", "SweepResult", "Wavepacket", "averaged_ldos", "build_bandprofile",
    "build_levels", "core_width", "diagonalize", "effective_ldos", "eigenstate_ldos",
    "ensemble_evolve", "estimate_borders", "evolve", "export_model", "factorization_diagnostic",
    "fit_decay", "ingest_model", "ldos", "make_wavepacket", "participation_ratio",
    "randomized_partner", "sample_perturbation", "scaling_exponent", "sweep", "synthetic_model",
    "transform_perturbation", "wavepacket_ldos",
]
