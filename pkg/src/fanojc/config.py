"""Run configuration: flat key=value files, overrides, canonical serialisation.

Rates are configured in natural units: ``g`` is absolute (angular frequency,
rad/ns), other rates and detunings are multiples of g, drive strengths are
multiples of the driven polariton's effective loss rate, and delay grids are
multiples of the polariton amplitude lifetime 2/Gamma_eff.  ``#`` starts a
comment; every config round-trips losslessly through serialize/parse.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .jc_model import SystemParams, gamma_eff

__all__ = [
    "RunConfig",
    "ConfigError",
    "parse_config",
    "serialize_config",
    "apply_overrides",
]

SWEEP_AXES = ("delta", "laser_detuning", "drive", "tau")
GRID_KINDS = ("linear", "log")
OUTPUT_MODES = ("blocking", "fano", "both")
STATISTIC_TOKENS = ("transmission", "decomposition", "g2", "g2n")


class ConfigError(ValueError):
    """A configuration file or override could not be parsed or validated."""


@dataclass(frozen=True)
class RunConfig:
    """Resolved configuration of one pipeline run."""

    g: float = 2.0 * np.pi * 10.0
    kappa_over_g: float = 1.0
    gamma_over_g: float = 0.0
    delta_over_g: float = 3.0
    laser_detuning_over_g: float = 0.0
    drive_over_gamma_eff: float = 1e-3
    n_max: int = 15
    output_fraction: float = 0.5
    sweep: str = "laser_detuning"
    grid: str = "linear"
    start: float = -2.0
    stop: float = 6.0
    count: int = 81
    mode: str = "both"
    statistics: str = ""
    drives_over_gamma_eff: tuple[float, ...] = ()
    n_manifolds: int = 3
    input: str = ""
    out: str = ""
    convergence_gate: bool = True

    def validate(self) -> "RunConfig":
        if self.g <= 0:
            raise ConfigError("g must be positive")
        if self.kappa_over_g < 0 or self.gamma_over_g < 0:
            raise ConfigError("rates must be non-negative")
        if self.n_max < 1:
            raise ConfigError("n_max must be at least 1")
        if not 0.0 < self.output_fraction <= 1.0:
            raise ConfigError("output_fraction must lie in (0, 1]")
        if self.sweep not in SWEEP_AXES:
            raise ConfigError(f"sweep must be one of {SWEEP_AXES}")
        if self.grid not in GRID_KINDS:
            raise ConfigError(f"grid must be one of {GRID_KINDS}")
        if self.mode not in OUTPUT_MODES:
            raise ConfigError(f"mode must be one of {OUTPUT_MODES}")
        if self.count < 2:
            raise ConfigError("grid count must be at least 2")
        if self.start == self.stop:
            raise ConfigError("grid start and stop must differ")
        if self.grid == "log" and (self.start <= 0 or self.stop <= 0):
            raise ConfigError("log grid requires positive start and stop")
        for token in self.statistic_tokens():
            if token not in STATISTIC_TOKENS:
                raise ConfigError(
                    f"unknown statistic {token!r}; allowed: {STATISTIC_TOKENS}"
                )
        if self.n_manifolds < 1:
            raise ConfigError("n_manifolds must be at least 1")
        if any(m <= 0 for m in self.drives_over_gamma_eff):
            raise ConfigError("drive multiples must be positive")
        return self

    # -- derived quantities ------------------------------------------------

    def statistic_tokens(self) -> tuple[str, ...]:
        if not self.statistics.strip():
            return ()
        return tuple(t.strip() for t in self.statistics.split(",") if t.strip())

    @property
    def kappa(self) -> float:
        return self.kappa_over_g * self.g

    @property
    def gamma(self) -> float:
        return self.gamma_over_g * self.g

    @property
    def delta(self) -> float:
        return self.delta_over_g * self.g

    def gamma_eff_value(self, delta: float | None = None) -> float:
        return gamma_eff(self.g, self.kappa, self.delta if delta is None else delta)

    def system_params(
        self,
        delta: float | None = None,
        laser_detuning: float | None = None,
        drive: float | None = None,
        n_max: int | None = None,
    ) -> SystemParams:
        return SystemParams(
            g=self.g,
            kappa=self.kappa,
            gamma=self.gamma,
            delta=self.delta if delta is None else delta,
            laser_detuning=(
                self.laser_detuning_over_g * self.g
                if laser_detuning is None
                else laser_detuning
            ),
            drive=(
                self.drive_over_gamma_eff * self.gamma_eff_value()
                if drive is None
                else drive
            ),
            n_max=self.n_max if n_max is None else n_max,
            output_fraction=self.output_fraction,
        )

    def grid_values(self) -> np.ndarray:
        if self.grid == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


# -- parsing ----------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {raw!r} is not a number") from exc
    if kind == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {raw!r} is not an integer") from exc
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: {raw!r} is not a boolean")
    if kind == "tuple[float, ...]":
        if not raw:
            return ()
        try:
            return tuple(float(part) for part in raw.split(",") if part.strip())
        except ValueError as exc:
            raise ConfigError(f"{key}: {raw!r} is not a number list") from exc
    return raw


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    return str(value)


def parse_config(text: str) -> RunConfig:
    """Parse flat key=value text (with # comments) into a validated RunConfig."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return RunConfig(**values).validate()


def serialize_config(cfg: RunConfig) -> str:
    """Canonical key=value text; parse(serialize(cfg)) == cfg."""
    lines = [
        f"{f.name}={_format_value(getattr(cfg, f.name))}" for f in fields(RunConfig)
    ]
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply repeatable key=value overrides (the CLI --set flag)."""
    updates = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown key {key!r} in override")
        updates[key] = _parse_value(key, raw)
    return replace(cfg, **updates).validate()
