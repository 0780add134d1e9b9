"""Closed-form expected AoI under (n, k) and (n, m, k) replication.

The user-side age after waiting for the first ``k`` of ``m`` responses is
the ``k``-th order statistic of the response times plus the smallest server
age among those ``k`` responders.  With exponential responses (rate mu) and
Poisson updates (rate lambda) this gives

    E[age(k)] = (H(m) - H(m - k)) / mu + 1 / (k * lambda)

and with responses uniform on ``[a, a + h]``

    E[age(k)] = k * h / (m + 1) + a + 1 / (k * lambda).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

from aoi_pull.errors import DomainError
from aoi_pull.stochastic import Exponential, ResponseTimeModel, Uniform, UpdateProcess

TIE_RTOL = 1e-12


def _check_rate(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive and finite, got {value}")


def _check_int(name: str, value, lo: int, hi: int | None = None) -> None:
    if isinstance(value, bool) or int(value) != value:
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < lo or (hi is not None and value > hi):
        upper = "" if hi is None else f", {hi}"
        raise DomainError(f"{name}={value} outside [{lo}{upper}]")


@dataclass(frozen=True)
class ReplicationScheme:
    """Send to ``m`` of ``n`` servers, stop after the first ``k`` responses."""

    n: int
    m: int | None = None
    k: int = 1

    def __post_init__(self):
        if self.m is None:
            object.__setattr__(self, "m", self.n)
        _check_int("n", self.n, 1)
        _check_int("m", self.m, 1, self.n)
        _check_int("k", self.k, 1, self.m)


@dataclass(frozen=True)
class SystemParams:
    scheme: ReplicationScheme
    update: UpdateProcess
    response: ResponseTimeModel


@dataclass(frozen=True)
class OptimalK:
    """Optimal stopping count.

    ``k_prime`` is the positive real root of the difference function; when it
    is an integer inside the range both ``k_prime`` and ``k_prime + 1`` are
    optimal, ``tie`` is set and ``k_star`` holds the smaller one.
    """

    k_star: int
    k_prime: float
    tie: bool


def harmonic(n: int) -> float:
    """Partial harmonic sum 1 + 1/2 + ... + 1/n, with ``harmonic(0) == 0``."""
    _check_int("n", n, 0)
    return _harmonic(int(n))


@lru_cache(maxsize=4096)
def _harmonic(n: int) -> float:
    total = 0.0
    for l in range(1, n + 1):
        total += 1.0 / l
    return total


def expected_wait(n: int, k: int, mu: float) -> float:
    """Mean of the k-th smallest of n i.i.d. Exp(mu) response times."""
    _check_int("n", n, 1)
    _check_int("k", k, 1, n)
    _check_rate("mu", mu)
    return (_harmonic(int(n)) - _harmonic(int(n - k))) / mu


def expected_min_age(k: int, lam: float) -> float:
    """Mean of the smallest of k i.i.d. Exp(lambda) server ages."""
    _check_int("k", k, 1)
    _check_rate("lambda", lam)
    return 1.0 / (k * lam)


def _exponential_rates(params: SystemParams) -> tuple[float, float]:
    if not isinstance(params.response, Exponential):
        raise DomainError(
            f"closed form needs exponential response times, got {type(params.response).__name__}"
        )
    return params.update.lam, params.response.mu


def expected_aoi(params: SystemParams, k: int | None = None) -> float:
    """Expected user-side AoI for the (n, k) scheme with exponential responses.

    ``k`` defaults to ``params.scheme.k``.  The scheme's fan-out must be ``n``.
    """
    scheme = params.scheme
    if scheme.m != scheme.n:
        raise DomainError("expected_aoi covers m = n; use expected_aoi_subset")
    return expected_aoi_subset(params, k)


def expected_aoi_subset(params: SystemParams, k: int | None = None) -> float:
    """Expected AoI when the request fans out to ``m`` random servers out of ``n``.

    Only ``m`` enters the result.
    """
    lam, mu = _exponential_rates(params)
    m = params.scheme.m
    k = params.scheme.k if k is None else k
    _check_int("k", k, 1, m)
    return expected_wait(m, k, mu) + expected_min_age(k, lam)


def expected_aoi_uniform(n: int, k: int, lam: float, a: float, h: float) -> float:
    """Expected AoI with response times uniform on ``[a, a + h]``."""
    _check_int("n", n, 1)
    _check_int("k", k, 1, n)
    _check_rate("lambda", lam)
    if not (math.isfinite(a) and a >= 0) or not (math.isfinite(h) and h >= 0):
        raise DomainError(f"need a >= 0 and h >= 0, got a={a}, h={h}")
    return k * h / (n + 1) + a + 1.0 / (k * lam)


def aoi_difference(n: int, k: int, lam: float, mu: float) -> float:
    """E[age(k + 1)] - E[age(k)] for exponential responses, 1 <= k <= n - 1."""
    _check_int("n", n, 2)
    _check_int("k", k, 1, n - 1)
    _check_rate("lambda", lam)
    _check_rate("mu", mu)
    return 1.0 / ((n - k) * mu) - 1.0 / (k * (k + 1) * lam)


def _uniform_difference(n: int, k: int, lam: float, h: float) -> float:
    return h / (n + 1) - 1.0 / (k * (k + 1) * lam)


def _resolve(k_prime: float, n: int, diff: Callable[[int], float], scale: float) -> OptimalK:
    """Round the real root to the optimal integer, flagging exact ties."""
    k_star = min(math.ceil(k_prime), n)
    nearest = round(k_prime)
    if 1 <= nearest <= n - 1 and abs(diff(nearest)) <= TIE_RTOL * scale:
        return OptimalK(k_star=nearest, k_prime=k_prime, tie=True)
    return OptimalK(k_star=max(k_star, 1), k_prime=k_prime, tie=False)


def optimal_k_exponential(n: int, lam: float, mu: float) -> OptimalK:
    """Optimal number of responses to await under exponential response times."""
    _check_int("n", n, 1)
    _check_rate("lambda", lam)
    _check_rate("mu", mu)
    k_prime = 2 * mu * n / (math.sqrt((lam + mu) ** 2 + 4 * lam * mu * n) + lam + mu)
    if n == 1:
        return OptimalK(k_star=1, k_prime=k_prime, tie=False)
    return _resolve(
        k_prime, n, lambda k: aoi_difference(n, k, lam, mu), max(1.0 / mu, 1.0 / lam)
    )


def optimal_k_uniform(n: int, lam: float, h: float) -> OptimalK:
    """Optimal number of responses to await under uniform response times.

    Independent of the offset ``a``.  For ``h == 0`` every response arrives
    at the same instant, the objective ``a + 1/(k lambda)`` strictly
    decreases in ``k`` and the answer is ``n`` (``k_prime`` is infinite).
    """
    _check_int("n", n, 1)
    _check_rate("lambda", lam)
    if not (math.isfinite(h) and h >= 0):
        raise DomainError(f"h must be nonnegative, got {h}")
    if h == 0:
        return OptimalK(k_star=n, k_prime=math.inf, tie=False)
    hl = h * lam
    k_prime = 2 * (n + 1) / (math.sqrt(hl * hl + 4 * hl * (n + 1)) + hl)
    if n == 1:
        return OptimalK(k_star=1, k_prime=k_prime, tie=False)
    return _resolve(
        k_prime, n, lambda k: _uniform_difference(n, k, lam, h), max(h, 1.0 / lam)
    )


def optimal_k_bruteforce(evaluator: Callable[[int], float], k_max: int) -> int:
    """Smallest minimizer of ``evaluator`` over ``1 .. k_max`` by exhaustive scan."""
    _check_int("k_max", k_max, 1)
    best_k, best = 1, evaluator(1)
    for k in range(2, k_max + 1):
        value = evaluator(k)
        if value < best:
            best_k, best = k, value
    return best_k


def corollary_thresholds(n: int, mu: float) -> tuple[float, float]:
    """Update rates bounding the two extreme policies.

    Returns ``(lambda_high, lambda_low)``: waiting for one response is optimal
    iff ``lambda >= lambda_high``; waiting for all ``n`` is optimal iff
    ``lambda <= lambda_low``.
    """
    _check_int("n", n, 2)
    _check_rate("mu", mu)
    return mu * (n - 1) / 2, mu / (n * (n - 1))


def improvement_ratio(n: int, lam: float, mu: float) -> float:
    """E[age(1)] / E[age(k*)] for the (n, k) scheme with exponential responses."""
    k_star = optimal_k_exponential(n, lam, mu).k_star
    first = expected_wait(n, 1, mu) + expected_min_age(1, lam)
    best = expected_wait(n, k_star, mu) + expected_min_age(k_star, lam)
    return first / best


def exponential_params(n: int, lam: float, mu: float, m: int | None = None, k: int = 1) -> SystemParams:
    """Convenience constructor for the exponential system."""
    return SystemParams(ReplicationScheme(n, m, k), UpdateProcess(lam), Exponential(mu))


def analytic_curve(params: SystemParams) -> list[float] | None:
    """Expected AoI for every k in ``1 .. m``, or None when no closed form exists."""
    m = params.scheme.m
    lam = params.update.lam
    response = params.response
    if isinstance(response, Exponential):
        return [expected_wait(m, k, response.mu) + expected_min_age(k, lam) for k in range(1, m + 1)]
    if isinstance(response, Uniform):
        return [expected_aoi_uniform(m, k, lam, response.a, response.h) for k in range(1, m + 1)]
    return None
