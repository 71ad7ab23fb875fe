"""Run configuration: defaults < SUBHEAT_SEED < config file < command-line flags.

Config files are flat ``key=value`` (or ``key: value``) lines whose keys
are flag names, with ``-`` or ``_``::

    exponent = stable:0.75
    domain = interval:0,1
    t-ladder = 1e-4,1e-6,1e-8
    paths = 1000000
    tolerance.high-index = 0.05
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Mapping, Optional, Tuple

import yaml

from subheat.errors import ConfigError
from subheat.exponents import LaplaceExponent, parse_exponent
from subheat.oracles import Domain, parse_domain
from subheat.samplers import DEFAULT_REFINE_BISECTIONS, TimeChangeKind
from subheat.streams import RandomStream

logger = logging.getLogger(__name__)

SEED_ENV = "SUBHEAT_SEED"
FORMATS = ("csv", "json")
DEFAULT_LADDER = (1e-2, 1e-4, 1e-6)
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RunConfig:
    exponent: str = "stable:0.75"
    domain: str = "interval:0,1"
    time_change: str = "sub"
    t_ladder: Tuple[float, ...] = DEFAULT_LADDER
    paths: int = 1 << 16
    seed: int = 0
    workers: int = 1
    format: str = "csv"
    out: Optional[str] = None
    suite: str = "all"
    quick: bool = False
    tolerances: Dict[str, float] = field(default_factory=dict)
    grid_step: Optional[float] = None
    refine_bisections: int = DEFAULT_REFINE_BISECTIONS
    verbose: int = 0

    def __post_init__(self) -> None:
        parse_exponent(self.exponent)
        parse_domain(self.domain)
        if self.time_change not in ("sub", "inv"):
            raise ConfigError(f"time change must be 'sub' or 'inv', got {self.time_change!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")
        check_ladder(self.t_ladder)
        if self.paths < 2:
            raise ConfigError(f"paths must be >= 2, got {self.paths!r}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers!r}")
        if not 0 <= self.seed <= _MASK64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.grid_step is not None and not self.grid_step > 0.0:
            raise ConfigError(f"grid step must be > 0, got {self.grid_step!r}")
        if self.refine_bisections < 0:
            raise ConfigError(f"refine bisections must be >= 0, got {self.refine_bisections!r}")

    @property
    def exponent_value(self) -> LaplaceExponent:
        return parse_exponent(self.exponent)

    @property
    def domain_value(self) -> Domain:
        return parse_domain(self.domain)

    @property
    def kind(self) -> TimeChangeKind:
        return TimeChangeKind(self.time_change)

    @property
    def stream(self) -> RandomStream:
        return RandomStream(self.seed)

    def tolerance_for(self, suite: str, default: float) -> float:
        return self.tolerances.get(suite, default)


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------

def check_ladder(ladder: Iterable[float]) -> Tuple[float, ...]:
    values = tuple(float(t) for t in ladder)
    if not values:
        raise ConfigError("t ladder is empty")
    if any(not t > 0.0 for t in values):
        raise ConfigError(f"t ladder values must be > 0, got {list(values)!r}")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"t ladder must be strictly decreasing, got {list(values)!r}")
    return values


def parse_ladder(text: Any) -> Tuple[float, ...]:
    """``"1e-2,1e-4"`` or a list of numbers."""
    items = text if isinstance(text, (list, tuple)) else str(text).split(",")
    try:
        return check_ladder(float(str(item).strip()) for item in items if str(item).strip())
    except ValueError:
        raise ConfigError(f"cannot parse t ladder {text!r}") from None


def parse_tolerance(text: str) -> Tuple[str, float]:
    """``<suite>=<fraction>``."""
    name, sep, value = text.partition("=")
    try:
        tolerance = float(value)
    except ValueError:
        tolerance = -1.0
    if not sep or not name.strip() or not tolerance >= 0.0:
        raise ConfigError(f"tolerance override must look like '<suite>=<x>' with x >= 0, got {text!r}")
    return name.strip(), tolerance


_CASTS = {
    "paths": int,
    "seed": int,
    "workers": int,
    "refine_bisections": int,
    "verbose": int,
    "grid_step": float,
    "quick": bool,
}


def _coerce(key: str, value: Any) -> Any:
    if key == "t_ladder":
        return parse_ladder(value)
    if key == "t":
        return parse_ladder([value])
    cast = _CASTS.get(key, str)
    try:
        if cast is int:
            # yaml leaves 1e6 as a string
            number = float(value)
            if number != int(number):
                raise ValueError
            return int(number)
        if cast is bool and isinstance(value, str):
            raise ValueError
        return cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key.replace('_', '-')}: {value!r}") from None


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

def _normalise_line(line: str) -> str:
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return ""
    key, sep, value = stripped.partition("=")
    if not sep:
        key, sep, value = stripped.partition(":")
    if not sep:
        raise ConfigError(f"config line is not 'key=value': {line.strip()!r}")
    # values stay strings for yaml unless they are plainly scalars
    return f"{key.strip()!r}: {value.strip()!r}" if "," in value or ":" in value else f"{key.strip()!r}: {value.strip()}"


def load_config_file(path: str) -> Dict[str, Any]:
    """Read a flat key=value file into RunConfig keyword values."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from None
    normalised = "\n".join(_normalise_line(line) for line in text.splitlines())
    try:
        raw = yaml.safe_load(normalised) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path!r}: {exc}") from None

    values: Dict[str, Any] = {}
    tolerances: Dict[str, float] = {}
    known = {f.name for f in fields(RunConfig)} | {"t"}
    for key, value in raw.items():
        key = str(key).strip()
        if key.startswith("tolerance."):
            name, tolerance = parse_tolerance(f"{key[len('tolerance.'):]}={value}")
            tolerances[name] = tolerance
            continue
        name = key.replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown key {key!r} in config file {path!r}")
        coerced = _coerce(name, value)
        values["t_ladder" if name == "t" else name] = coerced
    if tolerances:
        values["tolerances"] = tolerances
    logger.debug("config file %s: %s", path, values)
    return values


def _environment(environ: Mapping[str, str]) -> Dict[str, Any]:
    seed = environ.get(SEED_ENV)
    if seed is None or not seed.strip():
        return {}
    try:
        return {"seed": int(seed.strip(), 0)}
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {seed!r}") from None


def build_config(
    flags: Mapping[str, Any],
    config_file: Optional[str] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge the sources; ``flags`` entries that are None (or empty) were not given."""
    environ = os.environ if environ is None else environ
    values: Dict[str, Any] = {}
    values.update(_environment(environ))
    if config_file:
        values.update(load_config_file(config_file))

    tolerances = dict(values.get("tolerances", {}))
    for key, value in flags.items():
        if value is None or value == ():
            continue
        if key == "tolerance":
            tolerances.update(parse_tolerance(item) for item in value)
        elif key == "t":
            values["t_ladder"] = parse_ladder([value])
        elif key == "t_ladder":
            values["t_ladder"] = parse_ladder(value)
        else:
            values[key] = value
    values["tolerances"] = tolerances
    return RunConfig(**values)


def with_overrides(config: RunConfig, **changes: Any) -> RunConfig:
    return replace(config, **changes)
