"""Feedback capacities of moving-average Gaussian channels.

A numerical toolkit built around three mutually checking routes to the same
quantities: closed-form capacity roots, blockwise dynamic-programming
recursions with their fixed points, and explicit constructions (greedy
projection strategies, a generic block optimizer, and a Monte Carlo link
simulator of the linear feedback coding scheme).
"""

from .capacity import (
    CapacityResult,
    ar1_achievable_rate,
    arma11_conjectured_rate,
    interleaved_ma2_greedy_rate,
    ma1_feedback_capacity,
    white_capacity,
)
from .errors import DomainError, NumericalError
from .noise import (
    CovMatrix,
    EntropyRate,
    Kind,
    NoiseModel,
    covariance,
    covariance_modified,
    entropy_rate,
    entropy_rate_from_spectrum,
    ma1_lower_factor,
    normalize_ma1,
    spectral_density,
)
from .oracle import (
    BlockCapacityEstimate,
    StrategyMatrices,
    check_orthogonality,
    equivalence_gap,
    generic_optimize,
    greedy_construct,
    lemma1_max,
    objective,
    strategy_from_json,
    strategy_to_json,
)
from .recursion import (
    PowerAllocation,
    RecursionTrace,
    ar1_fixed_point,
    ar1_recursion,
    ma1_fixed_point,
    ma1_recursion,
    optimize_allocation,
    phi_ar1,
    psi_ma1,
)
from .sim import (
    SchemeParams,
    SimReport,
    conditional_variance_curve,
    decode_ml,
    encode,
    nonfeedback_baseline,
    output_spectrum_theoretical,
    run_montecarlo,
)

__version__ = "0.1.0"

__all__ = [
    "BlockCapacityEstimate",
    "CapacityResult",
    "CovMatrix",
    "DomainError",
    "EntropyRate",
    "Kind",
    "NoiseModel",
    "NumericalError",
    "PowerAllocation",
    "RecursionTrace",
    "SchemeParams",
    "SimReport",
    "StrategyMatrices",
    "ar1_achievable_rate",
    "ar1_fixed_point",
    "ar1_recursion",
    "arma11_conjectured_rate",
    "check_orthogonality",
    "conditional_variance_curve",
    "covariance",
    "covariance_modified",
    "decode_ml",
    "encode",
    "entropy_rate",
    "entropy_rate_from_spectrum",
    "equivalence_gap",
    "generic_optimize",
    "greedy_construct",
    "interleaved_ma2_greedy_rate",
    "lemma1_max",
    "ma1_feedback_capacity",
    "ma1_fixed_point",
    "ma1_lower_factor",
    "ma1_recursion",
    "nonfeedback_baseline",
    "normalize_ma1",
    "objective",
    "optimize_allocation",
    "output_spectrum_theoretical",
    "phi_ar1",
    "psi_ma1",
    "run_montecarlo",
    "spectral_density",
    "strategy_from_json",
    "strategy_to_json",
    "white_capacity",
]
