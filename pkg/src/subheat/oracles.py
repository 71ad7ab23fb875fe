"""Heat contents of Brownian motion with generator Delta (variance 2u per coordinate).

Interval (a, b) of length L, exact:

    h(z; u) = sqrt(u) * ierfc(z / (2 sqrt(u)))
    |Omega| - Q(u) = 4 h(0) + 8 sum_{k>=1} (-1)^k h(kL)            u <  L^2/10
    Q(u)           = sum_{k odd} 8L/(k pi)^2 exp(-(k pi / L)^2 u)    u >= L^2/10
    H_{Omega,Omega^c}(u) = 2 h(0) - 2 h(L)

Disk of radius R: Euler walk with a Brownian-bridge kill at each step,
vectorised over paths that each carry their own clock.
"""

from __future__ import annotations

import functools
import logging
import math
import time
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import special

from subheat.errors import ConfigError, DomainError, UnsupportedConfiguration
from subheat.samplers import StreamLike, _open_uniform, _rng
from subheat.streams import BlockStats, Estimate, RandomStream, run_blocks

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

SERIES_SWITCH = 0.1  # in units of L^2
IMAGE_TERMS = 6
EIGEN_TERMS = 6
DEFAULT_WALK_STEPS = 64


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise DomainError(f"interval needs a < b, got ({self.a!r}, {self.b!r})")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def volume(self) -> float:
        return self.length

    @property
    def surface(self) -> float:
        return 2.0


@dataclass(frozen=True)
class Disk:
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0.0:
            raise DomainError(f"disk radius must be > 0, got {self.radius!r}")

    @property
    def volume(self) -> float:
        return math.pi * self.radius**2

    @property
    def surface(self) -> float:
        return 2.0 * math.pi * self.radius


Domain = Union[Interval, Disk]


def parse_domain(spec: str) -> Domain:
    """Parse ``interval:<a>,<b>`` or ``disk:<R>``."""
    kind, sep, body = spec.strip().partition(":")
    if not sep or not body:
        raise ConfigError(f"domain spec must look like 'kind:params', got {spec!r}")
    try:
        values = [float(part) for part in body.split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse numbers in domain spec {spec!r}") from None
    kind = kind.lower()
    try:
        if kind == "interval" and len(values) == 2:
            return Interval(*values)
        if kind == "disk" and len(values) == 1:
            return Disk(values[0])
    except DomainError as exc:
        raise ConfigError(f"invalid domain spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown domain spec {spec!r}; expected 'interval:<a>,<b>' or 'disk:<R>'")


def format_domain(dom: Domain) -> str:
    if isinstance(dom, Interval):
        return f"interval:{dom.a:g},{dom.b:g}"
    return f"disk:{dom.radius:g}"


def require_interval(dom: Domain, what: str) -> Interval:
    if not isinstance(dom, Interval):
        raise UnsupportedConfiguration(f"{what} needs an interval domain, got {format_domain(dom)!r}")
    return dom


# ---------------------------------------------------------------------------
# Exact interval oracles
# ---------------------------------------------------------------------------

def _clock(u: ArrayLike) -> Tuple[np.ndarray, Tuple[int, ...]]:
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise DomainError(f"clock u must be >= 0, got {u!r}")
    return arr.ravel(), arr.shape


def _unwrap(flat: np.ndarray, shape: Tuple[int, ...]) -> ArrayLike:
    return float(flat[0]) if shape == () else flat.reshape(shape)


def _h(z: float, u: np.ndarray) -> np.ndarray:
    root = np.sqrt(u)
    x = z / (2.0 * root)
    # e^{-x^2} (1/sqrt(pi) - x erfcx(x)) == ierfc(x) without erfc underflow
    return root * np.exp(-x * x) * (1.0 / math.sqrt(math.pi) - x * special.erfcx(x))


def _eigen_terms(length: float, u: np.ndarray):
    k = np.arange(1, 2 * EIGEN_TERMS, 2, dtype=float)
    rates = (k * math.pi / length) ** 2
    return k, np.exp(-np.multiply.outer(u, rates))


def _deficit_small(length: float, u: np.ndarray) -> np.ndarray:
    total = 4.0 * _h(0.0, u)
    for k in range(1, IMAGE_TERMS + 1):
        total = total + 8.0 * (-1) ** k * _h(k * length, u)
    return total


def _q_large(length: float, u: np.ndarray) -> np.ndarray:
    k, decay = _eigen_terms(length, u)
    return decay @ (8.0 * length / (k * math.pi) ** 2)


def _deficit(length: float, u: np.ndarray) -> np.ndarray:
    out = np.zeros(u.shape)
    small = (u > 0.0) & (u < SERIES_SWITCH * length**2)
    large = u >= SERIES_SWITCH * length**2
    out[small] = _deficit_small(length, u[small])
    out[large] = length - _q_large(length, u[large])
    return out


def exact_Q_deficit_interval(dom: Interval, u: ArrayLike) -> ArrayLike:
    """|Omega| - Q(u), accurate for tiny u where Q itself rounds to |Omega|."""
    flat, shape = _clock(u)
    return _unwrap(np.clip(_deficit(dom.length, flat), 0.0, dom.length), shape)


def exact_Q_interval(dom: Interval, u: ArrayLike) -> ArrayLike:
    """Spectral heat content Q(u) of the interval; values in [0, |Omega|]."""
    flat, shape = _clock(u)
    length = dom.length
    out = length - _deficit(length, flat)
    large = flat >= SERIES_SWITCH * length**2
    out[large] = _q_large(length, flat[large])
    return _unwrap(np.clip(out, 0.0, length), shape)


def exact_Q_deficit_rate(dom: Interval, u: ArrayLike) -> ArrayLike:
    """d/du (|Omega| - Q(u)); blows up like 2 / sqrt(pi u) at 0."""
    flat, shape = _clock(u)
    length = dom.length
    out = np.full(flat.shape, math.inf)
    small = (flat > 0.0) & (flat < SERIES_SWITCH * length**2)
    large = flat >= SERIES_SWITCH * length**2
    us = flat[small]
    total = np.full(us.shape, 4.0)
    for k in range(1, IMAGE_TERMS + 1):
        total = total + 8.0 * (-1) ** k * np.exp(-((k * length) ** 2) / (4.0 * us))
    out[small] = total / (2.0 * np.sqrt(math.pi * us))
    _, decay = _eigen_terms(length, flat[large])
    out[large] = decay.sum(axis=-1) * 8.0 / length
    return _unwrap(out, shape)


def exact_H_interval(dom: Interval, u: ArrayLike) -> ArrayLike:
    """Regular heat loss H_{Omega,Omega^c}(u) = int_Omega P_x(W_u not in Omega) dx."""
    flat, shape = _clock(u)
    out = np.zeros(flat.shape)
    finite = (flat > 0.0) & np.isfinite(flat)
    out[finite] = 2.0 * (_h(0.0, flat[finite]) - _h(dom.length, flat[finite]))
    out[np.isinf(flat)] = dom.length
    return _unwrap(np.clip(out, 0.0, dom.length), shape)


# ---------------------------------------------------------------------------
# Path Monte Carlo with bridge correction
# ---------------------------------------------------------------------------

def stratified_starts(dom: Domain, stream: StreamLike, size: int) -> np.ndarray:
    """Uniform starting points, one per stratum of length (interval) or of r^2 (disk)."""
    rng = _rng(stream)
    cells = (np.arange(size) + _open_uniform(rng, size)) / size
    if isinstance(dom, Interval):
        return dom.a + dom.length * cells
    radius = dom.radius * np.sqrt(cells)
    angle = 2.0 * math.pi * rng.random(size)
    return np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])


def _distances(dom: Domain, x: np.ndarray):
    if isinstance(dom, Interval):
        return (x - dom.a, dom.b - x)
    return (dom.radius - np.hypot(x[:, 0], x[:, 1]),)


def mc_exit_walk(
    dom: Domain,
    clocks: np.ndarray,
    starts: np.ndarray,
    stream: StreamLike,
    steps: int = DEFAULT_WALK_STEPS,
) -> np.ndarray:
    """Survival indicators of Brownian paths run from ``starts`` up to per-path ``clocks``.

    Each of the ``steps`` Euler steps of length h = clock/steps also kills
    with the half-space bridge probability exp(-d1 d2 / h), applied to every
    boundary piece (both ends of an interval, the circle of a disk).
    """
    rng = _rng(stream)
    clocks = np.asarray(clocks, dtype=float)
    x = np.array(starts, dtype=float)
    n = clocks.shape[0]
    finite = np.isfinite(clocks)
    h = np.where(finite, clocks, 0.0) / steps
    scale = np.sqrt(2.0 * h)
    if x.ndim == 2:
        scale = scale[:, None]
    alive = finite.copy()
    before = _distances(dom, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(steps):
            x = x + scale * rng.standard_normal(x.shape)
            after = _distances(dom, x)
            keep = np.ones(n)
            for d1, d2 in zip(before, after):
                alive &= d2 > 0.0
                keep = keep * -np.expm1(-np.where(h > 0.0, d1 * d2 / h, np.inf))
            alive &= rng.random(n) < keep
            before = after
    return alive


def _walk_kernel(dom: Domain, u: float, steps: int, stream: RandomStream, size: int) -> np.ndarray:
    rng = stream.generator()
    starts = stratified_starts(dom, rng, size)
    return mc_exit_walk(dom, np.full(size, u), starts, rng, steps).astype(float) * dom.volume


def _mc_Q(dom: Domain, u: float, n_paths: int, stream: RandomStream, steps: int, workers: int) -> Estimate:
    if not u > 0.0:
        raise DomainError(f"clock u must be > 0, got {u!r}")
    started = time.perf_counter()
    kernel = functools.partial(_walk_kernel, dom, float(u), steps)
    stats: BlockStats = run_blocks(kernel, n_paths, stream, workers)
    estimate = Estimate.from_stats(stats, stream.seed, time.perf_counter() - started, dom.volume)
    logger.info("path MC on %s at u=%g: %.6g +- %.2g", format_domain(dom), u, estimate.value, estimate.stderr)
    return estimate


def mc_Q_disk(
    dom: Disk,
    u: float,
    n_paths: int,
    stream: RandomStream,
    steps: int = DEFAULT_WALK_STEPS,
    workers: int = 1,
) -> Estimate:
    """Bridge-corrected path estimate of Q(u) on a disk."""
    if not isinstance(dom, Disk):
        raise UnsupportedConfiguration(f"mc_Q_disk needs a disk, got {format_domain(dom)!r}")
    return _mc_Q(dom, u, n_paths, stream, steps, workers)


def mc_Q_interval(
    dom: Interval,
    u: float,
    n_paths: int,
    stream: RandomStream,
    steps: int = DEFAULT_WALK_STEPS,
    workers: int = 1,
) -> Estimate:
    """Same walk on an interval, for cross-checking the bridge correction against the exact oracle."""
    require_interval(dom, "mc_Q_interval")
    return _mc_Q(dom, u, n_paths, stream, steps, workers)
