"""Reproducible sampling of server ages and response times.

Randomness comes from a counter-based generator: the ``j``-th uniform of
stream ``(seed, stream_index)`` is a pure function of the triple
``(seed, stream_index, j)``.  Any subset of draws can therefore be produced
in any order, by any number of workers, with bit-identical results.

Seed derivation (public contract)::

    mix64(z)      = SplitMix64 finalizer
    key(seed, i)  = mix64(mix64(seed) + STREAM_GAMMA * (i + 1))
    word(seed, i, j) = mix64(key(seed, i) + COUNTER_GAMMA * (j + 1))
    uniform       = (word >> 11) * 2**-53          # in [0, 1)

All arithmetic is modulo 2**64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.stats import poisson

from aoi_pull.errors import ParameterError

MASK64 = (1 << 64) - 1
STREAM_GAMMA = 0x9E3779B97F4A7C15
COUNTER_GAMMA = 0xD1B54A32D192ED03
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 2.0**-53


def mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 output finalizer, applied elementwise to a uint64 array."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def stream_keys(seed: int, stream_indices) -> np.ndarray:
    """Per-stream 64-bit keys for ``seed`` and an array of stream indices."""
    if not 0 <= seed <= MASK64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    base = mix64(np.array([seed], dtype=np.uint64))
    idx = np.asarray(stream_indices, dtype=np.uint64)
    return mix64(base + np.uint64(STREAM_GAMMA) * (idx + np.uint64(1)))


def block_uniforms(seed: int, stream_indices, start: int, width: int) -> np.ndarray:
    """Uniforms at counters ``start .. start+width-1`` for each stream.

    Returns an array of shape ``(len(stream_indices), width)``; row ``t``
    equals what ``RandomStream(seed, stream_indices[t])`` yields after
    ``start`` prior draws.
    """
    keys = stream_keys(seed, stream_indices)[:, None]
    counters = np.arange(start + 1, start + width + 1, dtype=np.uint64)[None, :]
    words = mix64(keys + np.uint64(COUNTER_GAMMA) * counters)
    return (words >> np.uint64(11)).astype(np.float64) * _TO_UNIT


@dataclass
class RandomStream:
    """A reproducible sequence of uniforms identified by ``(seed, stream_index)``.

    The stream keeps a cursor so successive calls continue the sequence;
    two fresh streams with the same identity produce the same values.
    """

    seed: int
    stream_index: int = 0
    position: int = field(default=0, compare=False)

    def __post_init__(self):
        if not 0 <= self.seed <= MASK64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not 0 <= self.stream_index <= MASK64:
            raise ParameterError(f"stream_index must be unsigned, got {self.stream_index}")

    def uniform(self, size: int | None = None):
        """Next ``size`` uniforms on [0, 1) (a float when ``size`` is None)."""
        count = 1 if size is None else int(size)
        u = block_uniforms(self.seed, [self.stream_index], self.position, count)[0]
        self.position += count
        return float(u[0]) if size is None else u

    def spawn(self, offset: int) -> "RandomStream":
        return RandomStream(self.seed, (self.stream_index + offset) & MASK64)


def exponential_from_uniform(u, rate: float):
    """Inverse-CDF transform of uniforms on [0, 1) to Exp(rate)."""
    return -np.log1p(-np.asarray(u)) / rate


@dataclass(frozen=True)
class UpdateProcess:
    """Poisson update process at one server."""

    lam: float

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ParameterError(f"update rate must be positive and finite, got {self.lam}")


@dataclass(frozen=True)
class Exponential:
    mu: float

    uniforms_per_draw = 1

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise ParameterError(f"exponential rate must be positive, got {self.mu}")

    @property
    def mean(self) -> float:
        return 1.0 / self.mu

    @property
    def variance(self) -> float:
        return 1.0 / self.mu**2

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return exponential_from_uniform(u[..., 0], self.mu)


@dataclass(frozen=True)
class Uniform:
    """Uniform response time on ``[a, a + h]``; ``h = 0`` is a point mass."""

    a: float
    h: float

    uniforms_per_draw = 1

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a >= 0):
            raise ParameterError(f"uniform offset must be nonnegative, got {self.a}")
        if not (math.isfinite(self.h) and self.h >= 0):
            raise ParameterError(f"uniform width must be nonnegative, got {self.h}")

    @property
    def mean(self) -> float:
        return self.a + self.h / 2

    @property
    def variance(self) -> float:
        return self.h**2 / 12

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return self.a + self.h * u[..., 0]


@dataclass(frozen=True)
class Erlang:
    """Sum of ``r`` i.i.d. exponentials, each with mean ``theta``."""

    r: int
    theta: float

    def __post_init__(self):
        if isinstance(self.r, bool) or int(self.r) != self.r or self.r < 1:
            raise ParameterError(f"Erlang shape must be a positive integer, got {self.r}")
        if not (math.isfinite(self.theta) and self.theta > 0):
            raise ParameterError(f"Erlang scale must be positive, got {self.theta}")

    @classmethod
    def with_mean(cls, r: int, mean: float) -> "Erlang":
        if not mean > 0:
            raise ParameterError(f"mean must be positive, got {mean}")
        return cls(r, mean / r)

    @property
    def uniforms_per_draw(self) -> int:
        return int(self.r)

    @property
    def mean(self) -> float:
        return self.r * self.theta

    @property
    def variance(self) -> float:
        return self.r * self.theta**2

    def from_uniforms(self, u: np.ndarray) -> np.ndarray:
        return exponential_from_uniform(u, 1.0 / self.theta).sum(axis=-1)


ResponseTimeModel = Union[Exponential, Uniform, Erlang]


def model_mean(model: ResponseTimeModel) -> float:
    return model.mean


def sample_response(model: ResponseTimeModel, stream: RandomStream, size: int | None = None):
    """Draw response time(s) from ``model``.

    Each draw consumes ``model.uniforms_per_draw`` consecutive uniforms.
    """
    per = model.uniforms_per_draw
    count = 1 if size is None else int(size)
    u = stream.uniform(count * per).reshape(count, per)
    draws = model.from_uniforms(u)
    return float(draws[0]) if size is None else draws


def sample_age_memoryless(process: UpdateProcess, stream: RandomStream, size: int | None = None):
    """Age at a stationary random epoch, drawn directly as Exp(lambda)."""
    u = stream.uniform(size)
    draws = exponential_from_uniform(u, process.lam)
    return float(draws) if size is None else draws


def ages_at_epoch(lam: float, s, u_count, u_last) -> np.ndarray:
    """Ages at epoch ``s`` of Poisson(lam) update paths started at time 0.

    Given ``s``, the number of updates in ``[0, s]`` is Poisson(lam * s) and,
    given that count ``j``, the update epochs are i.i.d. uniform on
    ``[0, s]``; the latest one sits at ``s * V**(1/j)`` for ``V`` uniform.
    ``u_count`` drives the count by inversion and ``u_last`` supplies ``V``.
    With no update before ``s`` the age is ``s``.  Arguments broadcast.
    """
    s = np.asarray(s, dtype=np.float64)
    rate = lam * s
    count = np.where(rate > 0, poisson.ppf(u_count, np.maximum(rate, 1e-300)), 0.0)
    v = 1.0 - np.asarray(u_last)  # in (0, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = -np.expm1(np.log(v) / count)
    return np.where(count > 0, s * frac, s)


def sample_age_trajectory(
    process: UpdateProcess, horizon: float, stream: RandomStream, size: int | None = None
):
    """Age at an epoch drawn uniformly from ``[0, horizon]`` of a Poisson update path.

    Uses the conditional-uniform representation of the update epochs so the
    cost does not grow with ``lambda * horizon``.  :func:`simulate_updates`
    builds the full path explicitly for cross-checking at short horizons.
    """
    if not (math.isfinite(horizon) and horizon > 0):
        raise ParameterError(f"horizon must be positive, got {horizon}")
    count = 1 if size is None else int(size)
    u = stream.uniform(3 * count).reshape(count, 3)
    ages = ages_at_epoch(process.lam, u[:, 0] * horizon, u[:, 1], u[:, 2])
    return float(ages[0]) if size is None else ages


def simulate_updates(process: UpdateProcess, horizon: float, stream: RandomStream) -> np.ndarray:
    """Update epochs on ``[0, horizon]`` built from cumulative exponential gaps."""
    if not (math.isfinite(horizon) and horizon > 0):
        raise ParameterError(f"horizon must be positive, got {horizon}")
    epochs = []
    t = 0.0
    batch = max(16, int(process.lam * horizon * 1.1) + 16)
    while True:
        gaps = exponential_from_uniform(stream.uniform(batch), process.lam)
        times = t + np.cumsum(gaps)
        inside = times[times <= horizon]
        epochs.append(inside)
        if inside.size < times.size:
            return np.concatenate(epochs)
        t = float(times[-1])


def age_at(epochs: np.ndarray, s: float) -> float:
    """Time since the latest epoch at or before ``s``; ``s`` itself if none."""
    idx = np.searchsorted(epochs, s, side="right")
    return s if idx == 0 else s - float(epochs[idx - 1])
