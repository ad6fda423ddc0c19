"""Experiment documents: YAML schema, validation and round-trip serialization.

A document fully specifies one closed-loop experiment: the plant and its noise
level, the reference, the surrogate network parameter file, the per-channel
disturbance intervals / grid tolerances / true schedules, controller and
change-detector settings, and Monte Carlo randomization. Validation errors
name the offending field path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import yaml

from .controller import ControllerConfig
from .errors import ConfigError
from .grid import BoundedInterval, CandidateGrid, grid_from_intervals
from .learner import ResetPolicy
from .plants import PlantModel, ReferenceSpec, DisturbanceSchedule, Segments, validate_segments
from .rbf import RbfNetwork, load_network

SCHEMA_VERSION = 1
CHANNELS = ("alpha", "beta", "gamma")
_COVARIANCE_PRESETS = ("identity", "zero", "interval_variance")


@dataclass(frozen=True)
class ChannelSpec:
    """Bounded interval, grid tolerance and true timeline of one channel."""

    interval: BoundedInterval
    schedule: Segments


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    iterations: int
    seed: int
    initial_output: float
    initial_control: float
    plant: PlantModel
    reference: ReferenceSpec
    network: RbfNetwork
    network_file: str
    alpha: ChannelSpec
    beta: ChannelSpec
    gamma: ChannelSpec
    controller: ControllerConfig
    reset: ResetPolicy
    initial_covariance: tuple[tuple[float, ...], ...]
    mc_randomize: tuple[str, ...] = ()
    rng: str = "pcg64"
    output_dir: str | None = None
    schema_version: int = SCHEMA_VERSION

    def build_grid(self) -> CandidateGrid:
        return grid_from_intervals(
            self.alpha.interval, self.beta.interval, self.gamma.interval
        )

    def build_schedule(self) -> DisturbanceSchedule:
        return DisturbanceSchedule(
            alpha=self.alpha.schedule, beta=self.beta.schedule, gamma=self.gamma.schedule
        )


def _expect(mapping, key, types, path, required=True, default=None):
    if key not in mapping:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    value = mapping[key]
    # Explicit nulls on optional fields mean "not set".
    if value is None and not required:
        return default
    if types is not None and not isinstance(value, types):
        raise ConfigError(
            f"{path}.{key}: expected {getattr(types, '__name__', types)}, got {type(value).__name__}"
        )
    return value


def _number(mapping, key, path, required=True, default=None):
    v = _expect(mapping, key, (int, float), path, required, default)
    if isinstance(v, bool):
        raise ConfigError(f"{path}.{key}: expected a number, got a boolean")
    return float(v) if v is not None else None


def _segments(raw, path) -> Segments:
    if not isinstance(raw, list) or not all(
        isinstance(s, list) and len(s) == 2 for s in raw
    ):
        raise ConfigError(f"{path}: expected a list of [start_k, value] pairs")
    try:
        return validate_segments(raw, path)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _channel(raw, path, iterations) -> ChannelSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    try:
        interval = BoundedInterval(
            lower=_number(raw, "lower", path),
            upper=_number(raw, "upper", path),
            admissible_error=_number(raw, "eps", path),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    sched = _segments(_expect(raw, "schedule", list, path), f"{path}.schedule")
    if sched[-1][0] > iterations:
        raise ConfigError(
            f"{path}.schedule: segment starts at k={sched[-1][0]} beyond iterations={iterations}"
        )
    return ChannelSpec(interval=interval, schedule=sched)


def _plant(raw, path) -> PlantModel:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    kind = _expect(raw, "kind", str, path)
    if kind == "user_defined":
        raise ConfigError(f"{path}.kind: user_defined plants are API-only")
    params = _expect(raw, "params", dict, path, required=False, default={})
    try:
        return PlantModel(
            kind=kind,
            noise_variance=_number(raw, "noise_variance", path),
            params={k: float(v) for k, v in params.items()},
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _reference(raw, path) -> ReferenceSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping")
    kind = _expect(raw, "kind", str, path)
    try:
        if kind == "cosine":
            return ReferenceSpec(
                kind=kind,
                amplitude=_number(raw, "amplitude", path, required=False, default=1.0),
                half_cycles=_number(raw, "half_cycles", path),
                span=int(_number(raw, "span", path)),
            )
        if kind == "square":
            return ReferenceSpec(
                kind=kind, segments=_segments(_expect(raw, "segments", list, path), f"{path}.segments")
            )
        if kind == "logistic_train":
            return ReferenceSpec(
                kind=kind,
                base=_number(raw, "base", path),
                gain=_number(raw, "gain", path),
                rate=_number(raw, "rate", path),
                form=_expect(raw, "form", str, path, required=False, default="logistic"),
            )
        if kind == "user_table":
            values = _expect(raw, "values", list, path)
            return ReferenceSpec(kind=kind, values=tuple(float(v) for v in values))
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown reference kind {kind!r}")


def _initial_covariance(raw, path, channels) -> tuple[tuple[float, ...], ...]:
    if isinstance(raw, str):
        if raw not in _COVARIANCE_PRESETS:
            raise ConfigError(
                f"{path}: unknown preset {raw!r}, expected one of {_COVARIANCE_PRESETS} or a 3x3 matrix"
            )
        if raw == "identity":
            return tuple(tuple(1.0 if i == j else 0.0 for j in range(3)) for i in range(3))
        if raw == "zero":
            return ((0.0,) * 3,) * 3
        # interval_variance: variance of a uniform draw over each channel interval
        return tuple(
            tuple(ch.interval.width**2 / 12.0 if i == j else 0.0 for j in range(3))
            for i, ch in enumerate(channels)
        )
    if isinstance(raw, list):
        if len(raw) != 3 or any(not isinstance(r, list) or len(r) != 3 for r in raw):
            raise ConfigError(f"{path}: matrix form must be 3 rows of 3 numbers")
        return tuple(tuple(float(v) for v in row) for row in raw)
    raise ConfigError(f"{path}: expected a preset name or a 3x3 matrix")


def parse_config(path) -> ExperimentConfig:
    """Load, validate and resolve an experiment document."""
    with open(path) as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def config_from_dict(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    version = _expect(raw, "schema_version", int, "config")
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"config.schema_version: this build reads version {SCHEMA_VERSION}, got {version}"
        )
    iterations = _expect(raw, "iterations", int, "config")
    if iterations < 2:
        raise ConfigError("config.iterations: must be >= 2")
    rng = _expect(raw, "rng", str, "config", required=False, default="pcg64")
    if rng != "pcg64":
        raise ConfigError(f"config.rng: only 'pcg64' is supported, got {rng!r}")

    channels_raw = _expect(raw, "channels", dict, "config")
    channels = []
    for name in CHANNELS:
        if name not in channels_raw:
            raise ConfigError(f"config.channels.{name}: missing required field")
        channels.append(_channel(channels_raw[name], f"config.channels.{name}", iterations))

    controller_raw = _expect(raw, "controller", dict, "config")
    lam = _number(controller_raw, "dual_lambda", "config.controller")
    clamp = _number(controller_raw, "input_clamp", "config.controller", required=False)
    try:
        controller = ControllerConfig(dual_lambda=lam, input_clamp=clamp)
    except ValueError as exc:
        raise ConfigError(f"config.controller: {exc}") from exc

    reset_raw = _expect(raw, "reset", dict, "config")
    try:
        reset = ResetPolicy(
            admissible_error=_number(reset_raw, "admissible_error", "config.reset"),
            posterior_threshold=_number(
                reset_raw, "posterior_threshold", "config.reset", required=False, default=0.95
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"config.reset: {exc}") from exc

    mc_raw = _expect(raw, "monte_carlo", dict, "config", required=False, default={})
    randomize = _expect(mc_raw, "randomize", list, "config.monte_carlo", required=False, default=[])
    for ch in randomize:
        if ch not in CHANNELS:
            raise ConfigError(f"config.monte_carlo.randomize: unknown channel {ch!r}")

    network_file = _expect(raw, "network", str, "config")
    resolved = network_file if os.path.isabs(network_file) else os.path.join(base_dir, network_file)
    if not os.path.exists(resolved):
        raise ConfigError(f"config.network: parameter file not found: {resolved}")
    try:
        network = load_network(resolved)
    except ValueError as exc:
        raise ConfigError(f"config.network: {exc}") from exc

    return ExperimentConfig(
        name=_expect(raw, "name", str, "config"),
        iterations=iterations,
        seed=_expect(raw, "seed", int, "config"),
        rng=rng,
        initial_output=_number(raw, "initial_output", "config"),
        initial_control=_number(raw, "initial_control", "config", required=False, default=0.0),
        plant=_plant(_expect(raw, "plant", dict, "config"), "config.plant"),
        reference=_reference(_expect(raw, "reference", dict, "config"), "config.reference"),
        network=network,
        network_file=os.path.abspath(resolved),
        alpha=channels[0],
        beta=channels[1],
        gamma=channels[2],
        controller=controller,
        reset=reset,
        initial_covariance=_initial_covariance(
            _expect(raw, "initial_covariance", None, "config", required=False, default="identity"),
            "config.initial_covariance",
            channels,
        ),
        mc_randomize=tuple(randomize),
        output_dir=_expect(raw, "output_dir", str, "config", required=False),
        schema_version=version,
    )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    """Plain-YAML form of a config; parse_config(save) reproduces the dataclass."""
    def seg_list(segs):
        return [[k, v] for k, v in segs]

    ref = {"kind": cfg.reference.kind}
    if cfg.reference.kind == "cosine":
        ref.update(
            amplitude=cfg.reference.amplitude,
            half_cycles=cfg.reference.half_cycles,
            span=cfg.reference.span,
        )
    elif cfg.reference.kind == "square":
        ref["segments"] = seg_list(cfg.reference.segments)
    elif cfg.reference.kind == "logistic_train":
        ref.update(
            base=cfg.reference.base,
            gain=cfg.reference.gain,
            rate=cfg.reference.rate,
            form=cfg.reference.form,
        )
    else:
        ref["values"] = list(cfg.reference.values)

    out = {
        "schema_version": cfg.schema_version,
        "name": cfg.name,
        "iterations": cfg.iterations,
        "seed": cfg.seed,
        "rng": cfg.rng,
        "initial_output": cfg.initial_output,
        "initial_control": cfg.initial_control,
        "plant": {
            "kind": cfg.plant.kind,
            "noise_variance": cfg.plant.noise_variance,
            "params": dict(cfg.plant.params),
        },
        "reference": ref,
        "network": cfg.network_file,
        "channels": {
            name: {
                "lower": ch.interval.lower,
                "upper": ch.interval.upper,
                "eps": ch.interval.admissible_error,
                "schedule": seg_list(ch.schedule),
            }
            for name, ch in (("alpha", cfg.alpha), ("beta", cfg.beta), ("gamma", cfg.gamma))
        },
        "controller": {
            "dual_lambda": cfg.controller.dual_lambda,
            "input_clamp": cfg.controller.input_clamp,
        },
        "reset": {
            "admissible_error": cfg.reset.admissible_error,
            "posterior_threshold": cfg.reset.posterior_threshold,
        },
        "initial_covariance": [list(row) for row in cfg.initial_covariance],
        "monte_carlo": {"randomize": list(cfg.mc_randomize)},
    }
    if cfg.output_dir is not None:
        out["output_dir"] = cfg.output_dir
    return out


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)
