"""Rao-Blackwellised Monte Carlo estimators of time-changed heat contents.

For a clock U independent of the Brownian motion,

    Q~(t)    = E[Q^W(U_t)]            spectral heat content
    H(t)     = E[H^W_{Omega,Omega^c}(U_t)]   regular heat loss

so each path only needs a clock draw and an exact oracle evaluation.
Spectral estimates average the deficit |Omega| - Q^W(U_t) and report the
value as its complement, which keeps t ~ 1e-10 deficits at full precision.

Disk domains have no exact oracle and fall back to a two-stage estimate:
one clock draw and one bridge-corrected exit walk per path.
"""

from __future__ import annotations

import functools
import logging
import time
from typing import Callable, Optional

import numpy as np

from subheat.errors import DomainError, UnsupportedConfiguration
from subheat.exponents import LaplaceExponent, format_exponent
from subheat.oracles import (
    DEFAULT_WALK_STEPS,
    Disk,
    Domain,
    Interval,
    exact_H_interval,
    exact_Q_deficit_interval,
    format_domain,
    mc_exit_walk,
    require_interval,
    stratified_starts,
)
from subheat.samplers import (
    DEFAULT_REFINE_BISECTIONS,
    TailTilt,
    TimeChangeKind,
    TimeChangeSpec,
    sample_subordinator_weighted,
    sample_time_change,
)
from subheat.streams import Estimate, RandomStream, run_blocks

logger = logging.getLogger(__name__)

__all__ = [
    "Estimate",
    "estimate_spectral_subordinate",
    "estimate_spectral_inverse",
    "estimate_regular",
    "estimate_spectral_disk",
    "estimate_spectral_naive",
    "estimate_adaptive",
]

Oracle = Callable[[Interval, np.ndarray], np.ndarray]


def _check_run(t: float, n: int) -> None:
    if not t > 0.0:
        raise DomainError(f"time t must be > 0, got {t!r}")
    if n < 2:
        raise DomainError(f"need at least 2 paths for a standard error, got n={n!r}")


def _clip(estimate: Estimate, volume: float) -> Estimate:
    if 0.0 <= estimate.value <= volume:
        return estimate
    value = min(max(estimate.value, 0.0), volume)
    logger.warning(
        "estimate %.17g left [0, %g]; clipped to %.17g (stderr %.3g)",
        estimate.value, volume, value, estimate.stderr,
    )
    return Estimate(
        value, estimate.stderr, estimate.n_paths, estimate.seed, estimate.wall_time,
        volume - value, estimate.quantity,
    )


# ---------------------------------------------------------------------------
# Path kernels; module level so process pools can pickle them
# ---------------------------------------------------------------------------

def _weighted_clock_kernel(
    exp: LaplaceExponent,
    dom: Interval,
    t: float,
    tilt: Optional[TailTilt],
    oracle: Oracle,
    stream: RandomStream,
    size: int,
) -> np.ndarray:
    clocks, weights = sample_subordinator_weighted(exp, t, stream, size, tilt)
    return np.asarray(oracle(dom, clocks)) * weights


def _clock_kernel(spec: TimeChangeSpec, dom: Interval, t: float, oracle: Oracle, stream: RandomStream, size: int):
    return np.asarray(oracle(dom, sample_time_change(spec, t, stream, size)))


def _walk_kernel(spec: TimeChangeSpec, dom: Domain, t: float, steps: int, stream: RandomStream, size: int):
    rng = stream.generator()
    clocks = np.asarray(sample_time_change(spec, t, rng, size))
    starts = stratified_starts(dom, rng, size)
    return mc_exit_walk(dom, clocks, starts, rng, steps).astype(float) * dom.volume


def _run(
    kernel,
    n: int,
    stream: RandomStream,
    workers: int,
    volume: float,
    quantity: str,
    from_complement: bool,
    label: str,
) -> Estimate:
    started = time.perf_counter()
    stats = run_blocks(kernel, n, stream, workers)
    estimate = Estimate.from_stats(
        stats, stream.seed, time.perf_counter() - started, volume, quantity, from_complement
    )
    logger.info(
        "%s: %s = %.10g +- %.2g (%d paths, %.2fs)",
        label, quantity, estimate.value, estimate.stderr, estimate.n_paths, estimate.wall_time,
    )
    return _clip(estimate, volume)


def _time_change(
    exp: LaplaceExponent,
    kind: TimeChangeKind,
    grid_step: Optional[float],
    refine_bisections: int,
) -> TimeChangeSpec:
    return TimeChangeSpec(exp, TimeChangeKind(kind), grid_step, refine_bisections)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------

def estimate_spectral_subordinate(
    exp: LaplaceExponent,
    dom: Interval,
    t: float,
    n: int,
    stream: RandomStream,
    workers: int = 1,
    importance: bool = True,
) -> Estimate:
    """Q~(t) = E[Q^W(D_t)] for the subordinate killed Brownian motion.

    Clock draws are tilted towards D_t ~ L^2 unless ``importance`` is off;
    without the tilt, indices below 1/2 put almost all of the deficit on a
    handful of paths.
    """
    dom = require_interval(dom, "estimate_spectral_subordinate")
    _check_run(t, n)
    tilt = TailTilt(horizon=dom.length**2) if importance else None
    kernel = functools.partial(_weighted_clock_kernel, exp, dom, float(t), tilt, exact_Q_deficit_interval)
    label = f"{format_exponent(exp)} sub on {format_domain(dom)} t={t:g}"
    return _run(kernel, n, stream, workers, dom.volume, "spectral", True, label)


def estimate_spectral_inverse(
    exp: LaplaceExponent,
    dom: Interval,
    t: float,
    n: int,
    stream: RandomStream,
    workers: int = 1,
    grid_step: Optional[float] = None,
    refine_bisections: int = DEFAULT_REFINE_BISECTIONS,
) -> Estimate:
    """Q(t) = E[Q^W(E_t)]; E is continuous, so killing before or after the time change agree."""
    dom = require_interval(dom, "estimate_spectral_inverse")
    _check_run(t, n)
    spec = _time_change(exp, TimeChangeKind.INVERSE, grid_step, refine_bisections)
    kernel = functools.partial(_clock_kernel, spec, dom, float(t), exact_Q_deficit_interval)
    label = f"{format_exponent(exp)} inv on {format_domain(dom)} t={t:g}"
    return _run(kernel, n, stream, workers, dom.volume, "spectral", True, label)


def estimate_regular(
    exp: LaplaceExponent,
    dom: Interval,
    t: float,
    n: int,
    stream: RandomStream,
    kind: TimeChangeKind = TimeChangeKind.SUBORDINATOR,
    workers: int = 1,
    importance: bool = True,
    grid_step: Optional[float] = None,
    refine_bisections: int = DEFAULT_REFINE_BISECTIONS,
) -> Estimate:
    """H_{Omega,Omega^c}(t) = E[H^W_{Omega,Omega^c}(U_t)], U the subordinator or its inverse."""
    dom = require_interval(dom, "estimate_regular")
    if t == 0.0:
        # no heat has crossed yet
        return Estimate(0.0, 0.0, n, stream.seed, 0.0, dom.volume, "regular")
    _check_run(t, n)
    kind = TimeChangeKind(kind)
    if kind is TimeChangeKind.SUBORDINATOR:
        tilt = TailTilt(horizon=dom.length**2) if importance else None
        kernel = functools.partial(_weighted_clock_kernel, exp, dom, float(t), tilt, exact_H_interval)
    else:
        spec = _time_change(exp, kind, grid_step, refine_bisections)
        kernel = functools.partial(_clock_kernel, spec, dom, float(t), exact_H_interval)
    label = f"{format_exponent(exp)} {kind.value} on {format_domain(dom)} t={t:g}"
    return _run(kernel, n, stream, workers, dom.volume, "regular", False, label)


def estimate_spectral_disk(
    exp: LaplaceExponent,
    dom: Disk,
    t: float,
    n: int,
    stream: RandomStream,
    kind: TimeChangeKind = TimeChangeKind.SUBORDINATOR,
    workers: int = 1,
    steps: int = DEFAULT_WALK_STEPS,
    grid_step: Optional[float] = None,
    refine_bisections: int = DEFAULT_REFINE_BISECTIONS,
) -> Estimate:
    """Two-stage estimate: draw U_t, then one exit walk of duration U_t per path."""
    if not isinstance(dom, Disk):
        raise UnsupportedConfiguration(f"estimate_spectral_disk needs a disk, got {format_domain(dom)!r}")
    _check_run(t, n)
    spec = _time_change(exp, kind, grid_step, refine_bisections)
    kernel = functools.partial(_walk_kernel, spec, dom, float(t), steps)
    label = f"{format_exponent(exp)} {spec.kind.value} on {format_domain(dom)} t={t:g}"
    return _run(kernel, n, stream, workers, dom.volume, "spectral", False, label)


def estimate_spectral_naive(
    exp: LaplaceExponent,
    dom: Interval,
    t: float,
    n: int,
    stream: RandomStream,
    workers: int = 1,
    steps: int = DEFAULT_WALK_STEPS,
) -> Estimate:
    """Survival indicator of a simulated path run to the sampled clock.

    Same target as ``estimate_spectral_subordinate``; kept to measure how much
    variance the exact oracle removes.
    """
    dom = require_interval(dom, "estimate_spectral_naive")
    _check_run(t, n)
    spec = TimeChangeSpec(exp, TimeChangeKind.SUBORDINATOR)
    kernel = functools.partial(_walk_kernel, spec, dom, float(t), steps)
    label = f"{format_exponent(exp)} naive on {format_domain(dom)} t={t:g}"
    return _run(kernel, n, stream, workers, dom.volume, "spectral", False, label)


def estimate_adaptive(
    run: Callable[[int], Estimate],
    n_start: int = 1 << 14,
    target_fraction: float = 0.01,
    max_paths: int = 1 << 24,
) -> Estimate:
    """Double the path count until stderr <= target_fraction * complement.

    ``run(n)`` must return an Estimate; ``functools.partial`` over one of the
    estimators above with everything but ``n`` bound is the usual choice.
    """
    if not target_fraction > 0.0:
        raise DomainError(f"target_fraction must be > 0, got {target_fraction!r}")
    n = max(2, n_start)
    while True:
        estimate = run(n)
        reference = estimate.complement if estimate.quantity == "spectral" else estimate.value
        if estimate.stderr <= target_fraction * abs(reference):
            return estimate
        if 2 * n > max_paths:
            logger.warning(
                "stderr %.3g still above %g of %.6g at the %d path cap",
                estimate.stderr, target_fraction, reference, n,
            )
            return estimate
        logger.debug("stderr %.3g too large at n=%d; doubling", estimate.stderr, n)
        n *= 2
