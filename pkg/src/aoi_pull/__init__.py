"""Age of information for pull requests replicated across asynchronously updated servers."""

from aoi_pull.errors import DomainError, ParameterError
from aoi_pull.stochastic import (
    Erlang,
    Exponential,
    RandomStream,
    ResponseTimeModel,
    Uniform,
    UpdateProcess,
    model_mean,
    sample_age_memoryless,
    sample_age_trajectory,
    sample_response,
)
from aoi_pull.analytic import (
    OptimalK,
    ReplicationScheme,
    SystemParams,
    aoi_difference,
    corollary_thresholds,
    expected_aoi,
    expected_aoi_subset,
    expected_aoi_uniform,
    expected_min_age,
    expected_wait,
    harmonic,
    improvement_ratio,
    optimal_k_bruteforce,
    optimal_k_exponential,
    optimal_k_uniform,
)
from aoi_pull.simulator import (
    AgeMode,
    AoiEstimate,
    SimulationConfig,
    TrialOutcome,
    empirical_optimal_k,
    estimate_aoi,
    run_trial,
)

__version__ = "0.1.0"

__all__ = [
    "AgeMode",
    "AoiEstimate",
    "DomainError",
    "Erlang",
    "Exponential",
    "OptimalK",
    "ParameterError",
    "RandomStream",
    "ReplicationScheme",
    "ResponseTimeModel",
    "SimulationConfig",
    "SystemParams",
    "TrialOutcome",
    "Uniform",
    "UpdateProcess",
    "aoi_difference",
    "corollary_thresholds",
    "empirical_optimal_k",
    "estimate_aoi",
    "expected_aoi",
    "expected_aoi_subset",
    "expected_aoi_uniform",
    "expected_min_age",
    "expected_wait",
    "harmonic",
    "improvement_ratio",
    "model_mean",
    "optimal_k_bruteforce",
    "optimal_k_exponential",
    "optimal_k_uniform",
    "run_trial",
    "sample_age_memoryless",
    "sample_age_trajectory",
    "sample_response",
]
