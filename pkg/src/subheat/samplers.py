"""Marginal sampling of subordinators D_t and inverse subordinators E_t.

Stable draws use Kanter's representation

    S_1 = (A(U) / W)^{(1-beta)/beta},
    A(u) = (sin(beta pi u) / sin(pi u))^{1/(1-beta)} * sin((1-beta) pi u) / sin(beta pi u),

with U uniform on (0, 1) and W standard exponential, evaluated in log space
and in terms of V = 1 - U so that the heavy tail (U near 1) keeps its digits.
Tempered draws reject stable draws with probability 1 - exp(-theta X);
mixed draws add independent stable pieces. Inverse subordinators are
exact for the stable family and otherwise found by a dyadic first-passage
search.

Every function takes either a ``RandomStream`` or an already-open
``numpy.random.Generator``; composite samplers pass the generator down so a
stream is consumed exactly once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy import special

from subheat.errors import DomainError, SamplerRunaway
from subheat.exponents import (
    LaplaceExponent,
    MixedStable,
    Stable,
    TemperedStable,
)
from subheat.streams import RandomStream

logger = logging.getLogger(__name__)

StreamLike = Union[RandomStream, np.random.Generator]
Size = Optional[Union[int, Tuple[int, ...]]]

DEFAULT_GRID_FRACTION = 1e-3
DEFAULT_REFINE_BISECTIONS = 20
MAX_GRID_STEPS = 10**9
STALL_ROUNDS = 32
_SLAB = 1 << 22
_LOG_FLOOR = -700.0
_LOG_CEILING = 700.0


class TimeChangeKind(str, Enum):
    SUBORDINATOR = "sub"
    INVERSE = "inv"


@dataclass(frozen=True)
class TimeChangeSpec:
    """Which clock to run and, for grid-based inverse sampling, how finely.

    ``grid_step=None`` resolves to ``t * 1e-3`` at sampling time.
    """

    exponent: LaplaceExponent
    kind: TimeChangeKind = TimeChangeKind.SUBORDINATOR
    grid_step: Optional[float] = None
    refine_bisections: int = DEFAULT_REFINE_BISECTIONS

    def __post_init__(self) -> None:
        if self.grid_step is not None and not self.grid_step > 0.0:
            raise DomainError(f"grid_step must be > 0, got {self.grid_step!r}")
        if self.refine_bisections < 0:
            raise DomainError(f"refine_bisections must be >= 0, got {self.refine_bisections!r}")

    def resolved_grid_step(self, t: float) -> float:
        return self.grid_step if self.grid_step is not None else t * DEFAULT_GRID_FRACTION


def _rng(stream: StreamLike) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    return stream.generator()


def _shape(t: np.ndarray, size: Size) -> Tuple[int, ...]:
    if size is None:
        return t.shape
    return (size,) if isinstance(size, int) else tuple(size)


def _scalar_or_array(out: np.ndarray, t: np.ndarray, size: Size):
    return float(out) if size is None and t.ndim == 0 else out


def _check_time(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError(f"time t must be > 0, got {t!r}")
    return arr


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    u = rng.random(shape)
    return np.where(u > 0.0, u, 0.5 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# Stable
# ---------------------------------------------------------------------------

def _kanter_log_a(beta: float, v: np.ndarray) -> np.ndarray:
    """log A(1 - v)."""
    pi = math.pi
    sin_beta = np.sin(beta * pi * (1.0 - v))
    return (
        (np.log(sin_beta) - np.log(np.sin(pi * v))) / (1.0 - beta)
        + np.log(np.sin((1.0 - beta) * pi * (1.0 - v)))
        - np.log(sin_beta)
    )


def _log_stable_unit(beta: float, v: np.ndarray, log_w: np.ndarray) -> np.ndarray:
    return (1.0 - beta) / beta * (_kanter_log_a(beta, v) - log_w)


def _stable_draws(rng: np.random.Generator, beta: float, t: np.ndarray, shape) -> np.ndarray:
    v = _open_uniform(rng, shape)
    log_w = np.log(rng.standard_exponential(shape))
    return np.exp(_log_stable_unit(beta, v, log_w) + np.log(t) / beta)


def sample_stable(beta: float, t, stream: StreamLike, size: Size = None):
    """Draws of S_t^{(beta)} with E[exp(-s S_t)] = exp(-t s^beta)."""
    if not 0.0 < beta < 1.0:
        raise DomainError(f"stable index must lie in (0, 1), got {beta!r}")
    t_arr = _check_time(t)
    out = _stable_draws(_rng(stream), beta, t_arr, _shape(t_arr, size))
    return _scalar_or_array(out, t_arr, size)


# ---------------------------------------------------------------------------
# Tempered
# ---------------------------------------------------------------------------

def _tilted_rejection(rng: np.random.Generator, beta: float, theta: float, tau: np.ndarray) -> np.ndarray:
    """One tempered draw per entry of ``tau``; acceptance rate exp(-tau theta^beta)."""
    out = np.empty_like(tau)
    pending = np.arange(tau.size)
    while pending.size:
        x = _stable_draws(rng, beta, tau[pending], pending.size)
        accept = rng.random(pending.size) < np.exp(-theta * x)
        out[pending[accept]] = x[accept]
        pending = pending[~accept]
    return out


def _tempered_draws(rng: np.random.Generator, beta: float, theta: float, t: np.ndarray, shape) -> np.ndarray:
    t_full = np.broadcast_to(t, shape).ravel()
    # each chunk has tau theta^beta <= 1, so acceptance stays above 1/e
    chunks = np.maximum(np.ceil(t_full * theta**beta), 1.0).astype(np.int64)
    ends = np.cumsum(chunks)
    total = np.zeros(t_full.size)
    start = 0
    # groups of whole paths with at most _SLAB chunk draws between them
    while start < t_full.size:
        done = ends[start - 1] if start else 0
        stop = max(start + 1, int(np.searchsorted(ends, done + _SLAB, side="right")))
        counts = chunks[start:stop]
        owner = np.repeat(np.arange(stop - start), counts)
        x = _tilted_rejection(rng, beta, theta, np.repeat(t_full[start:stop] / counts, counts))
        total[start:stop] = np.bincount(owner, weights=x, minlength=stop - start)
        start = stop
    return total.reshape(shape)


def sample_tempered(beta: float, theta: float, t, stream: StreamLike, size: Size = None):
    """Draws of the tempered stable subordinator, phi(s) = (s + theta)^beta - theta^beta."""
    exp = TemperedStable(beta, theta)
    t_arr = _check_time(t)
    out = _tempered_draws(_rng(stream), exp.beta, exp.theta, t_arr, _shape(t_arr, size))
    return _scalar_or_array(out, t_arr, size)


def sample_tilted_stable(beta: float, t: float, theta: float, stream: StreamLike, size: int):
    """Exponentially tilted stable draws and the log likelihood ratio back to the stable law.

    Returns ``(x, log_lr)`` with ``E_stable[g(S_t)] = E[g(x) exp(log_lr)]``.
    """
    x = sample_tempered(beta, theta, t, stream, size)
    return x, theta * x - t * theta**beta


# ---------------------------------------------------------------------------
# Mixed and dispatch
# ---------------------------------------------------------------------------

def _mixed_draws(rng: np.random.Generator, comps, t: np.ndarray, shape) -> np.ndarray:
    total = np.zeros(shape)
    for beta, weight in comps:
        total = total + _stable_draws(rng, beta, weight * t, shape)
    return total


def sample_mixed(components, t, stream: StreamLike, size: Size = None):
    """Sum of independent stable draws; component (beta_i, w_i) runs for time w_i t."""
    comps = MixedStable(tuple((float(b), float(w)) for b, w in components)).components
    t_arr = _check_time(t)
    out = _mixed_draws(_rng(stream), comps, t_arr, _shape(t_arr, size))
    return _scalar_or_array(out, t_arr, size)


def _subordinator_draws(rng: np.random.Generator, exp: LaplaceExponent, t: np.ndarray, shape) -> np.ndarray:
    if isinstance(exp, Stable):
        return _stable_draws(rng, exp.beta, t, shape)
    if isinstance(exp, TemperedStable):
        return _tempered_draws(rng, exp.beta, exp.theta, t, shape)
    return _mixed_draws(rng, exp.components, t, shape)


def sample_subordinator(exp: LaplaceExponent, t, stream: StreamLike, size: Size = None):
    t_arr = _check_time(t)
    out = _subordinator_draws(_rng(stream), exp, t_arr, _shape(t_arr, size))
    return _scalar_or_array(out, t_arr, size)


# ---------------------------------------------------------------------------
# Importance-weighted subordinator draws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TailTilt:
    """Importance sampling towards large clock values.

    ``horizon`` is the clock scale at which the integrand stops growing (L^2
    for an interval of length L). Kanter's V and W are drawn from defensive
    mixtures: with probability ``mix`` from their own law, otherwise from
    Beta(a, 1) and Gamma(b, 1) with a, b matched to how deep into the tail the
    horizon sits. The likelihood ratio of each mixture is at most 1/mix.
    """

    horizon: float = 1.0
    mix: float = 0.5

    def __post_init__(self) -> None:
        if not self.horizon > 0.0:
            raise DomainError(f"tilt horizon must be > 0, got {self.horizon!r}")
        if not 0.0 < self.mix <= 1.0:
            raise DomainError(f"tilt mixture weight must lie in (0, 1], got {self.mix!r}")

    def exponents(self, beta: float, t: float) -> Tuple[float, float]:
        # V below t / horizon^beta, or W below that to the 1/(1-beta), pushes S_t past the horizon
        depth_v = beta * math.log(self.horizon) - math.log(t)
        if depth_v <= 1.0:
            # horizon already within reach of the untilted law: a = b = 1, every weight is 1
            return 1.0, 1.0
        return 1.0 / depth_v, (1.0 - beta) / depth_v


def _weighted_stable(rng: np.random.Generator, beta: float, t: float, tilt: TailTilt, size: int):
    a, b = tilt.exponents(beta, t)
    mix = tilt.mix
    from_law = rng.random(size) < mix
    u = _open_uniform(rng, size)
    log_v = np.where(from_law, np.log(u), np.maximum(np.log(u) / a, _LOG_FLOOR))
    v = np.exp(log_v)
    weight = 1.0 / (mix + (1.0 - mix) * a * np.exp((a - 1.0) * log_v))

    # Gamma(b) via Gamma(b + 1) * U^{1/b}, kept in logs so tiny b cannot underflow to 0
    from_law_w = rng.random(size) < mix
    log_exp = np.log(rng.standard_exponential(size))
    log_gamma = np.log(rng.standard_gamma(b + 1.0, size)) + np.log(_open_uniform(rng, size)) / b
    log_w = np.where(from_law_w, log_exp, log_gamma)
    ratio = np.exp((b - 1.0) * log_w - special.gammaln(b))
    weight = weight / (mix + (1.0 - mix) * ratio)

    log_x = _log_stable_unit(beta, v, log_w) + math.log(t) / beta
    return np.exp(np.minimum(log_x, _LOG_CEILING)), weight


def sample_subordinator_weighted(
    exp: LaplaceExponent,
    t: float,
    stream: StreamLike,
    size: int,
    tilt: Optional[TailTilt] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Draws of D_t with likelihood-ratio weights, ``E[g(D_t)] = E[g(x) w]``.

    Without a tilt the weights are all one and the draws are plain.
    """
    t = float(_check_time(t))
    rng = _rng(stream)
    if tilt is None:
        return _subordinator_draws(rng, exp, np.asarray(t), (size,)), np.ones(size)
    if isinstance(exp, Stable):
        return _weighted_stable(rng, exp.beta, t, tilt, size)
    if isinstance(exp, TemperedStable):
        if t * exp.theta**exp.beta > 1.0:
            return _tempered_draws(rng, exp.beta, exp.theta, np.asarray(t), (size,)), np.ones(size)
        x, weight = _weighted_stable(rng, exp.beta, t, tilt, size)
        return x, weight * np.exp(-exp.theta * x + t * exp.theta**exp.beta)
    total = np.zeros(size)
    weight = np.ones(size)
    for beta, w in exp.components:
        x, lr = _weighted_stable(rng, beta, w * t, tilt, size)
        total += x
        weight *= lr
    return total, weight


# ---------------------------------------------------------------------------
# Inverse subordinators
# ---------------------------------------------------------------------------

def _first_passage(
    rng: np.random.Generator,
    exp: LaplaceExponent,
    t: float,
    grid_step: float,
    refine_bisections: int,
    size: int,
) -> np.ndarray:
    """inf{u : D_u > t} on a dyadic grid anchored at multiples of ``grid_step``.

    Search: steps double while the walk stays at or below t. Refinement: the
    crossing step is redrawn as two half-steps conditioned on their sum
    crossing (rejection), and the half that crosses is kept. A step whose
    resampling stalls for STALL_ROUNDS rounds crosses by one jump that
    dwarfs the drift-free creep inside it; its passage time is then drawn
    uniformly within the step. Fully refined steps report their midpoint.
    """
    base_u = np.zeros(size)
    base_d = np.zeros(size)
    step = np.full(size, grid_step)

    searching = np.arange(size)
    while searching.size:
        x = _subordinator_draws(rng, exp, step[searching], searching.size)
        crossed = base_d[searching] + x > t
        moving = searching[~crossed]
        base_u[moving] += step[moving]
        base_d[moving] += x[~crossed]
        step[moving] *= 2.0
        searching = moving
        if searching.size and np.max(base_u[searching]) > MAX_GRID_STEPS * grid_step:
            raise SamplerRunaway(
                f"no first passage above t={t!r} after {MAX_GRID_STEPS} grid steps of {grid_step!r}"
            )

    out = np.empty(size)
    halvings = np.rint(np.log2(step / grid_step)).astype(np.int64) + refine_bisections
    active = np.flatnonzero(halvings > 0)
    stalled_total = 0
    while active.size:
        half = step[active] / 2.0
        gap = t - base_d[active]
        first = np.empty(active.size)
        pending = np.arange(active.size)
        for _ in range(STALL_ROUNDS):
            x1 = _subordinator_draws(rng, exp, half[pending], pending.size)
            x2 = _subordinator_draws(rng, exp, half[pending], pending.size)
            ok = x1 + x2 > gap[pending]
            first[pending[ok]] = x1[ok]
            pending = pending[~ok]
            if not pending.size:
                break
        stalled = active[pending]
        out[stalled] = base_u[stalled] + step[stalled] * rng.random(stalled.size)
        halvings[stalled] = -1
        stalled_total += stalled.size

        done = np.ones(active.size, dtype=bool)
        done[pending] = False
        in_second = done & (first <= gap)
        movers = active[in_second]
        base_u[movers] += half[in_second]
        base_d[movers] += first[in_second]
        step[active[done]] = half[done]
        halvings[active[done]] -= 1
        active = active[halvings[active] > 0]

    refined = halvings >= 0
    out[refined] = base_u[refined] + step[refined] / 2.0
    if stalled_total:
        logger.debug("%d of %d passage(s) placed uniformly in a jump-crossed step", stalled_total, size)
    return out


def sample_inverse(spec: TimeChangeSpec, t, stream: StreamLike, size: Size = None):
    """Draws of E_t = inf{u > 0 : D_u > t}.

    Stable exponents use {E_t <= x} = {D_x >= t} and self-similarity,
    E_t = (t / S_1)^beta, so draws at different t from one stream share a
    path and are monotone in t.
    """
    if spec.kind is not TimeChangeKind.INVERSE:
        raise DomainError(f"sample_inverse needs an inverse time change, got kind {spec.kind.value!r}")
    t_arr = _check_time(t)
    rng = _rng(stream)
    exp = spec.exponent
    shape = _shape(t_arr, size)
    if isinstance(exp, Stable):
        s1 = _stable_draws(rng, exp.beta, np.asarray(1.0), shape)
        out = np.exp(exp.beta * (np.log(t_arr) - np.log(s1)))
        return _scalar_or_array(out, t_arr, size)
    if t_arr.ndim:
        raise DomainError("grid first-passage sampling takes a scalar t")
    t_val = float(t_arr)
    n = int(np.prod(shape)) if shape else 1
    out = _first_passage(rng, exp, t_val, spec.resolved_grid_step(t_val), spec.refine_bisections, n)
    return float(out[0]) if size is None else out.reshape(shape)


def sample_time_change(spec: TimeChangeSpec, t, stream: StreamLike, size: Size = None):
    if spec.kind is TimeChangeKind.INVERSE:
        return sample_inverse(spec, t, stream, size)
    return sample_subordinator(spec.exponent, t, stream, size)
