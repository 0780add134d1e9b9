"""Command-line harness: closed forms, optimal k, simulation and sweeps as CSV.

Every flag can also be given as a key of a JSON object in ``--config``
(dashes become underscores, e.g. ``"horizon_factor"``); flags win.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from aoi_pull import __version__
from aoi_pull.analytic import (
    ReplicationScheme,
    SystemParams,
    corollary_thresholds,
    expected_aoi_uniform,
    expected_min_age,
    expected_wait,
    improvement_ratio,
    optimal_k_exponential,
    optimal_k_uniform,
)
from aoi_pull.errors import DomainError, ParameterError
from aoi_pull.simulator import (
    AgeMode,
    SimulationConfig,
    classify_shape,
    empirical_optimal_k,
    estimate_aoi,
)
from aoi_pull.stochastic import Erlang, Exponential, Uniform, UpdateProcess

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_IO = 3

COMMANDS = ("analytic", "optimal-k", "simulate", "sweep")

COLUMNS = {
    "analytic": ["k", "expected_wait", "expected_min_age", "expected_aoi"],
    "simulate": ["k", "mean_aoi", "std_error", "trials", "analytic_aoi"],
    "optimal-k": [
        "k_prime", "k_star", "tie", "aoi_at_kstar", "improvement_ratio", "lambda_high", "lambda_low",
    ],
    "sweep": ["axis_name", "axis_value", "k_star_analytic", "k_star_empirical", "improvement_ratio"],
}

DEFAULT_SWEEPS = {
    "lambda": [round(0.05 * i, 2) for i in range(1, 41)],
    "mu": [1, 2, 5, 10, 20, 50, 100, 200],
    "n": list(range(2, 51)),
}

# key -> (type, default); defaults apply after the config file is merged
KEYS = {
    "n": (int, 20),
    "m": (int, None),
    "lambda": (float, 1.0),
    "mu": (float, None),
    "a": (float, None),
    "h": (float, None),
    "r": (int, None),
    "theta": (float, None),
    "trials": (int, 1000),
    "seed": (int, 0),
    "age_mode": (str, "memoryless"),
    "horizon_factor": (float, 1e6),
    "workers": (int, 1),
    "out": (str, None),
    "axis": (str, None),
    "values": (str, None),
    "simulate": (bool, False),
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentSpec:
    command: str
    params: SystemParams
    simulation: SimulationConfig | None = None
    sweep_axis: str | None = None
    sweep_values: list[float] = field(default_factory=list)
    output_path: str | None = None
    workers: int = 1
    settings: dict = field(default_factory=dict)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aoi-pull", description="Age of information under (n, m, k) request replication."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with default values for any flag")
        p.add_argument("--n", type=int, help="total number of servers")
        p.add_argument("--m", type=int, help="fan-out (default n)")
        p.add_argument("--lambda", dest="lambda", type=float, help="update rate per server")
        p.add_argument("--mu", type=float, help="exponential response rate (Erlang: 1/mean)")
        p.add_argument("--a", type=float, help="uniform response offset")
        p.add_argument("--h", type=float, help="uniform response width")
        p.add_argument("--r", type=int, help="Erlang shape")
        p.add_argument("--theta", type=float, help="Erlang scale (default 1/(r mu))")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--age-mode", choices=[mode.value for mode in AgeMode])
        p.add_argument("--horizon-factor", type=float, help="horizon T = factor / lambda")
        p.add_argument("--workers", type=int, help="threads for trial blocks")
        p.add_argument("--out", help="output CSV path (default stdout)")
        if name == "sweep":
            p.add_argument("--axis", choices=sorted(DEFAULT_SWEEPS))
            p.add_argument("--values", help="comma-separated, strictly increasing")
            p.add_argument(
                "--simulate", action="store_true", default=None,
                help="also estimate k* by simulation",
            )
    return parser


def merge_settings(args: argparse.Namespace) -> dict:
    """Config-file values overridden by explicit flags, then defaults."""
    settings = {}
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
        for key, value in loaded.items():
            key = key.replace("-", "_")
            if key not in KEYS:
                raise UsageError(f"{args.config}: unknown key {key!r}")
            if key == "values" and isinstance(value, list):
                value = ",".join(str(v) for v in value)
            settings[key] = value
    for key in KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    for key, (kind, default) in KEYS.items():
        value = settings.get(key, default)
        if value is not None and kind is not str:
            try:
                value = kind(value)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"{key}: cannot interpret {value!r}") from exc
        settings[key] = value
    return settings


def response_model(settings: dict):
    if settings["a"] is not None or settings["h"] is not None:
        if settings["a"] is None or settings["h"] is None:
            raise UsageError("uniform response needs both --a and --h")
        return Uniform(settings["a"], settings["h"])
    if settings["r"] is not None:
        theta = settings["theta"]
        if theta is None:
            if settings["mu"] is None:
                raise UsageError("Erlang response needs --theta or --mu")
            return Erlang.with_mean(settings["r"], 1.0 / settings["mu"])
        return Erlang(settings["r"], theta)
    if settings["mu"] is None:
        raise UsageError("give a response model: --mu, (--a, --h) or (--r, --theta)")
    return Exponential(settings["mu"])


def parse_values(text: str, axis: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise DomainError(f"bad sweep values {text!r}") from exc
    if not values:
        raise DomainError("sweep needs at least one value")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise DomainError("sweep values must be strictly increasing")
    if any(not (math.isfinite(v) and v > 0) for v in values):
        raise DomainError("sweep values must be positive and finite")
    if axis == "n":
        if any(v != int(v) for v in values):
            raise DomainError("n values must be integers")
        values = [int(v) for v in values]
    return values


def build_spec(command: str, settings: dict) -> ExperimentSpec:
    if command == "sweep" and settings["axis"] == "mu" and settings["mu"] is None:
        # the swept value replaces mu at every point
        settings = dict(settings, mu=1.0)
    params = SystemParams(
        ReplicationScheme(settings["n"], settings["m"]),
        UpdateProcess(settings["lambda"]),
        response_model(settings),
    )
    spec = ExperimentSpec(
        command=command,
        params=params,
        output_path=settings["out"],
        workers=max(1, settings["workers"]),
        settings=settings,
    )
    if command == "simulate" or (command == "sweep" and settings["simulate"]):
        spec.simulation = SimulationConfig(
            params.scheme, params.update, params.response,
            trials=settings["trials"], seed=settings["seed"],
            age_mode=AgeMode(settings["age_mode"]), horizon_factor=settings["horizon_factor"],
        )
    if command == "sweep":
        if settings["axis"] is None:
            raise UsageError("sweep needs --axis")
        spec.sweep_axis = settings["axis"]
        if settings["values"] is None:
            spec.sweep_values = list(DEFAULT_SWEEPS[spec.sweep_axis])
        else:
            spec.sweep_values = parse_values(settings["values"], spec.sweep_axis)
    return spec


def _require_closed_form(params: SystemParams) -> None:
    if isinstance(params.response, Erlang):
        raise DomainError("no closed form for Erlang response times; use simulate")


def cmd_analytic(spec: ExperimentSpec) -> list[list]:
    params = spec.params
    _require_closed_form(params)
    m, lam, response = params.scheme.m, params.update.lam, params.response
    rows = []
    for k in range(1, m + 1):
        age = expected_min_age(k, lam)
        if isinstance(response, Exponential):
            wait = expected_wait(m, k, response.mu)
            total = wait + age
        else:
            wait = k * response.h / (m + 1) + response.a
            total = expected_aoi_uniform(m, k, lam, response.a, response.h)
        rows.append([k, wait, age, total])
    return rows


def cmd_optimal_k(spec: ExperimentSpec) -> list[list]:
    params = spec.params
    _require_closed_form(params)
    n, m, lam, response = params.scheme.n, params.scheme.m, params.update.lam, params.response
    if isinstance(response, Exponential):
        opt = optimal_k_exponential(m, lam, response.mu)
        aoi = expected_wait(m, opt.k_star, response.mu) + expected_min_age(opt.k_star, lam)
        ratio = improvement_ratio(n, lam, response.mu) if m == n else None
        high, low = corollary_thresholds(m, response.mu) if m >= 2 else (None, None)
    else:
        opt = optimal_k_uniform(m, lam, response.h)
        aoi = expected_aoi_uniform(m, opt.k_star, lam, response.a, response.h)
        first = expected_aoi_uniform(m, 1, lam, response.a, response.h)
        ratio = first / aoi if m == n else None
        high = low = None
    k_prime = opt.k_prime if math.isfinite(opt.k_prime) else None
    return [[k_prime, opt.k_star, int(opt.tie), aoi, ratio, high, low]]


def cmd_simulate(spec: ExperimentSpec) -> tuple[list[list], dict]:
    estimates = estimate_aoi(spec.simulation, workers=spec.workers)
    rows = [[e.k, e.mean, e.std_error, e.trials, e.analytic] for e in estimates]
    extra = {
        "shape": classify_shape([e.mean for e in estimates]),
        "empirical_k_star": empirical_optimal_k(estimates),
    }
    return rows, extra


def cmd_sweep(spec: ExperimentSpec) -> list[list]:
    params = spec.params
    if not isinstance(params.response, Exponential):
        raise DomainError("sweep supports exponential response times only")
    if params.scheme.m != params.scheme.n:
        raise DomainError("sweep covers the (n, k) scheme; leave --m unset")
    base = {"lambda": params.update.lam, "mu": params.response.mu, "n": params.scheme.n}
    points = []
    for value in spec.sweep_values:
        point = dict(base, **{spec.sweep_axis: value})
        # validate every point before computing any
        SystemParams(ReplicationScheme(point["n"]), UpdateProcess(point["lambda"]), Exponential(point["mu"]))
        points.append(point)
    rows = []
    for value, point in zip(spec.sweep_values, points):
        n, lam, mu = point["n"], point["lambda"], point["mu"]
        k_star = optimal_k_exponential(n, lam, mu).k_star
        empirical = None
        if spec.simulation is not None:
            sim = spec.simulation
            config = SimulationConfig(
                ReplicationScheme(n), UpdateProcess(lam), Exponential(mu),
                trials=sim.trials, seed=sim.seed, age_mode=sim.age_mode,
                horizon_factor=sim.horizon_factor,
            )
            empirical = empirical_optimal_k(estimate_aoi(config, workers=spec.workers))
        rows.append([spec.sweep_axis, value, k_star, empirical, improvement_ratio(n, lam, mu)])
    return rows


def format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise DomainError(f"non-finite value {value} in output")
        return repr(float(value))
    return str(value)


def render(spec: ExperimentSpec, rows: list[list], extra: dict | None = None) -> str:
    buf = io.StringIO()
    buf.write(f"# aoi-pull {__version__}\n")
    buf.write(f"# command={spec.command}\n")
    for key in sorted(spec.settings):
        if key in ("out", "workers") or key == spec.sweep_axis:
            continue
        buf.write(f"# {key}={format_cell(spec.settings[key])}\n")
    buf.write(f"# response={spec.params.response!r}\n")
    for key, value in (extra or {}).items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(COLUMNS[spec.command]) + "\n")
    for row in rows:
        buf.write(",".join(format_cell(v) for v in row) + "\n")
    return buf.getvalue()


def run(spec: ExperimentSpec) -> str:
    extra = None
    if spec.command == "analytic":
        rows = cmd_analytic(spec)
    elif spec.command == "optimal-k":
        rows = cmd_optimal_k(spec)
    elif spec.command == "simulate":
        rows, extra = cmd_simulate(spec)
    else:
        rows = cmd_sweep(spec)
    return render(spec, rows, extra)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = merge_settings(args)
        spec = build_spec(args.command, settings)
        text = run(spec)
    except OSError as exc:
        print(f"error: {exc.filename}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, DomainError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if spec.output_path is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(spec.output_path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {spec.output_path}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
