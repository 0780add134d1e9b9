"""Monte Carlo estimation of user-side AoI.

Each trial issues one request at a random epoch ``s`` and produces the
whole curve ``age(k)`` for ``k = 1 .. m`` from a single set of draws, so
comparisons across ``k`` share randomness.

Trial ``t`` reads its randomness from streams ``t * SUBSTREAMS + offset``
(see the ``*_STREAM`` offsets below).  Trials are simulated in fixed blocks
of ``BLOCK_TRIALS`` consecutive indices; worker count only decides which
thread computes which block, so results never depend on parallelism.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from aoi_pull.analytic import ReplicationScheme, SystemParams, analytic_curve
from aoi_pull.errors import DomainError, ParameterError
from aoi_pull.stochastic import (
    ResponseTimeModel,
    UpdateProcess,
    ages_at_epoch,
    block_uniforms,
    exponential_from_uniform,
)

SUBSTREAMS = 4
SUBSET_STREAM = 0
MEMORYLESS_AGE_STREAM = 1
RESPONSE_STREAM = 2
TRAJECTORY_AGE_STREAM = 3

BLOCK_TRIALS = 2048


class AgeMode(enum.Enum):
    MEMORYLESS = "memoryless"
    TRAJECTORY = "trajectory"


@dataclass(frozen=True)
class SimulationConfig:
    scheme: ReplicationScheme
    update: UpdateProcess
    response: ResponseTimeModel
    trials: int = 1000
    seed: int = 0
    age_mode: AgeMode = AgeMode.MEMORYLESS
    horizon_factor: float = 1e6

    def __post_init__(self):
        if isinstance(self.trials, bool) or int(self.trials) != self.trials or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials}")
        if not (math.isfinite(self.horizon_factor) and self.horizon_factor > 0):
            raise ParameterError(f"horizon_factor must be positive, got {self.horizon_factor}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "age_mode", AgeMode(self.age_mode))

    @property
    def horizon(self) -> float:
        return self.horizon_factor / self.update.lam

    @property
    def params(self) -> SystemParams:
        return SystemParams(self.scheme, self.update, self.response)


@dataclass(frozen=True)
class TrialOutcome:
    """One simulated request.

    ``sorted_responses[j]`` is the (j+1)-th response time, ``responder_ages[j]``
    the age at ``s`` of the server that sent it, ``servers[j]`` that server's
    index in ``0 .. n-1`` and ``aoi_curve[k-1]`` the user-side age when
    stopping after ``k`` responses.
    """

    sorted_responses: np.ndarray
    responder_ages: np.ndarray
    servers: np.ndarray
    aoi_curve: np.ndarray


@dataclass(frozen=True)
class TrialBatch:
    """Per-trial arrays of shape ``(trials, m)``, rows ordered by trial index."""

    sorted_responses: np.ndarray
    min_ages: np.ndarray
    aoi: np.ndarray


@dataclass(frozen=True)
class AoiEstimate:
    k: int
    mean: float
    std_error: float
    trials: int
    analytic: float | None = None


def _streams(trial_indices: np.ndarray, offset: int) -> np.ndarray:
    return trial_indices.astype(np.uint64) * np.uint64(SUBSTREAMS) + np.uint64(offset)


def _simulate_block(config: SimulationConfig, trial_indices: np.ndarray):
    """Simulate the given trials; returns (sorted responses, ages, servers)."""
    n, m = config.scheme.n, config.scheme.m
    seed = config.seed
    count = trial_indices.size

    if m == n:
        chosen = np.broadcast_to(np.arange(n), (count, n))
    else:
        keys = block_uniforms(seed, _streams(trial_indices, SUBSET_STREAM), 0, n)
        chosen = np.sort(np.argsort(keys, axis=1, kind="stable")[:, :m], axis=1)

    lam = config.update.lam
    if config.age_mode is AgeMode.MEMORYLESS:
        u = block_uniforms(seed, _streams(trial_indices, MEMORYLESS_AGE_STREAM), 0, n)
        server_ages = exponential_from_uniform(u, lam)
    else:
        # one request epoch per trial, then (count, last-update) uniforms per server
        u = block_uniforms(seed, _streams(trial_indices, TRAJECTORY_AGE_STREAM), 0, 1 + 2 * n)
        s = u[:, :1] * config.horizon
        server_ages = ages_at_epoch(lam, s, u[:, 1 : 1 + n], u[:, 1 + n :])
    ages = np.take_along_axis(server_ages, chosen, axis=1)

    per = config.response.uniforms_per_draw
    u = block_uniforms(seed, _streams(trial_indices, RESPONSE_STREAM), 0, m * per)
    responses = config.response.from_uniforms(u.reshape(count, m, per))

    # chosen is ascending by server index, so a stable sort breaks ties by index
    order = np.argsort(responses, axis=1, kind="stable")
    return (
        np.take_along_axis(responses, order, axis=1),
        np.take_along_axis(ages, order, axis=1),
        np.take_along_axis(chosen, order, axis=1),
    )


def run_trial(config: SimulationConfig, trial_index: int) -> TrialOutcome:
    """Simulate a single request; depends only on ``config.seed`` and ``trial_index``."""
    if trial_index < 0:
        raise DomainError(f"trial_index must be nonnegative, got {trial_index}")
    responses, ages, servers = _simulate_block(config, np.array([trial_index]))
    aoi = responses[0] + np.minimum.accumulate(ages[0])
    return TrialOutcome(responses[0], ages[0], servers[0], aoi)


def _block_curves(config: SimulationConfig, start: int, stop: int):
    responses, ages, _ = _simulate_block(config, np.arange(start, stop))
    min_ages = np.minimum.accumulate(ages, axis=1)
    return responses, min_ages, responses + min_ages


def simulate_trials(config: SimulationConfig, workers: int = 1) -> TrialBatch:
    """Run ``config.trials`` trials and return their full curves."""
    bounds = [
        (start, min(start + BLOCK_TRIALS, config.trials))
        for start in range(0, config.trials, BLOCK_TRIALS)
    ]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _block_curves(config, *b), bounds))
    else:
        parts = [_block_curves(config, *b) for b in bounds]
    responses, min_ages, aoi = (np.concatenate(arrays) for arrays in zip(*parts))
    return TrialBatch(responses, min_ages, aoi)


def summarize(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Column means and standard errors (unbiased variance; zero for one row)."""
    trials = samples.shape[0]
    means = samples.mean(axis=0)
    if trials < 2:
        return means, np.zeros_like(means)
    return means, samples.std(axis=0, ddof=1) / math.sqrt(trials)


def estimate_aoi(config: SimulationConfig, workers: int = 1) -> list[AoiEstimate]:
    """Per-k mean AoI with standard errors, plus the closed form where one exists."""
    if config.trials < 1:
        raise DomainError("need at least one trial")
    batch = simulate_trials(config, workers)
    means, errors = summarize(batch.aoi)
    reference = analytic_curve(config.params)
    return [
        AoiEstimate(
            k=k,
            mean=float(means[k - 1]),
            std_error=float(errors[k - 1]),
            trials=config.trials,
            analytic=None if reference is None else reference[k - 1],
        )
        for k in range(1, config.scheme.m + 1)
    ]


def empirical_optimal_k(estimates: list[AoiEstimate]) -> int:
    """Smallest ``k`` whose estimated mean is minimal."""
    if not estimates:
        raise DomainError("no estimates given")
    best = min(estimates, key=lambda e: (e.mean, e.k))
    return best.k


def classify_shape(means) -> str:
    """'increasing' when k = 1 is best, 'decreasing' when k = m is, else 'unimodal'."""
    best = int(np.argmin(means))
    if best == 0:
        return "increasing"
    if best == len(means) - 1:
        return "decreasing"
    return "unimodal"
