"""Excess-risk decomposition laboratory.

Runs standard, variance and bias training side by side on linear
regression, low-rank matrix recovery and small ReLU networks, and checks
the resulting risk trajectories against decomposition conditions and
generalization bounds.
"""

from .decomp import (DdcParams, DdcReport, SharpnessSpec, check_ddc, check_lemma1_additivity,
                     eq4_rhs_and_check, fit_min_a, run_decomposition, sharpness_for)
from .problems import (DiagonalRecoverySpec, GeneralRecoverySpec, LinearProblemSpec,
                       SpecificationError, gen_diagonal_measurements, gen_general_measurements,
                       gen_linear_dataset, split_signal_noise)
from .traces import DecompositionTrace

__version__ = "0.1.0"

__all__ = [
    "DdcParams", "DdcReport", "DecompositionTrace", "DiagonalRecoverySpec",
    "GeneralRecoverySpec", "LinearProblemSpec", "SharpnessSpec", "SpecificationError",
    "check_ddc", "check_lemma1_additivity", "eq4_rhs_and_check", "fit_min_a",
    "gen_diagonal_measurements", "gen_general_measurements", "gen_linear_dataset",
    "run_decomposition", "sharpness_for", "split_signal_noise",
]
