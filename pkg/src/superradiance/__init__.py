"""Multi-level superradiance: Dicke cascades and two-body mean-field dynamics with Doppler averaging."""

__version__ = "0.1.0"

from .angular import HalfInt, cg, half, projections
from .dicke import DickeLadder, emission_curve, enhancement_factor, evolve_cascade
from .rates import MediumParams, RatePair, solve_rates
from .twobody import Observables, ResonantRates, TwoBodyRun, observables, run_twobody

__all__ = [
    "HalfInt",
    "cg",
    "half",
    "projections",
    "DickeLadder",
    "emission_curve",
    "enhancement_factor",
    "evolve_cascade",
    "MediumParams",
    "RatePair",
    "solve_rates",
    "Observables",
    "ResonantRates",
    "TwoBodyRun",
    "observables",
    "run_twobody",
]
