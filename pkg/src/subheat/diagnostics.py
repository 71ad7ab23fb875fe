"""Numerical checks of the auxiliary limit statements behind the heat-content limits.

Each check returns a ``LadderReport``: the statistic along a ladder of
times (ordered by decreasing t), the fitted limit or slope, its target and
the verdict.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, special, stats

from subheat.errors import ConfigError, DomainError, HypothesisViolation, LadderError
from subheat.exponents import (
    LaplaceExponent,
    Stable,
    TemperedStable,
    components,
    format_exponent,
    leading_index,
    levy_density,
    levy_density_scaled,
    levy_tail,
    phi,
    phi_derivative,
    phi_inverse,
    upper_gamma_negative,
)
from subheat.asymptotics import inverse_moment, running_max_constant, stable_moment
from subheat.samplers import (
    DEFAULT_REFINE_BISECTIONS,
    TailTilt,
    TimeChangeKind,
    TimeChangeSpec,
    sample_inverse,
    sample_stable,
    sample_subordinator,
    sample_subordinator_weighted,
    sample_tempered,
)
from subheat.streams import BlockStats, RandomStream, collect_blocks, run_blocks

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 0.02
SLOPE_TOLERANCE = 0.1
TRUNCATION_TOLERANCE = 0.02
MIN_TILTED_HITS = 10
MAX_TILT_CHUNKS = 8192


@dataclass(frozen=True)
class LadderReport:
    """``points`` are (t or x, statistic, error bar); ``fitted`` is a limit or a slope per ``fit_kind``."""

    label: str
    points: List[Tuple[float, float, float]]
    fitted: float
    target: float
    tolerance: float
    passed: bool
    fit_kind: str = "limit"
    extras: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


def _check_ladder(t_ladder: Sequence[float], minimum: int = 1) -> np.ndarray:
    ts = np.asarray(list(t_ladder), dtype=float)
    if ts.size < minimum:
        raise LadderError(f"ladder needs at least {minimum} point(s), got {ts.tolist()!r}")
    if np.any(ts <= 0.0) or np.any(np.diff(ts) >= 0.0):
        raise LadderError(f"ladder must be positive and strictly decreasing, got {ts.tolist()!r}")
    return ts


def _within(value: float, target: float, stderr: float, tolerance: float) -> bool:
    return abs(value - target) <= max(4.0 * stderr, tolerance * abs(target))


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """``powexp``: min(x,1)^gamma e^{-x}; ``bump``: smooth bump on [a, b]; ``tail``: 1{x >= a}; ``zero``."""

    __test__ = False

    kind: str
    gamma: float = 0.0
    a: float = 0.0
    b: float = 0.0

    @property
    def horizon(self) -> float:
        """Scale beyond which the function stops growing."""
        return max(self.b, self.a, 1.0)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "powexp":
            return np.minimum(x, 1.0) ** self.gamma * np.exp(-x)
        if self.kind == "bump":
            s = (2.0 * x - self.a - self.b) / (self.b - self.a)
            inside = np.abs(s) < 1.0
            safe = np.where(inside, s, 0.0)
            return np.where(inside, np.exp(1.0 - 1.0 / (1.0 - safe * safe)), 0.0)
        if self.kind == "tail":
            return (x >= self.a).astype(float)
        return np.zeros_like(x)


def parse_test_function(tag: str) -> TestFunction:
    """``powexp:<gamma>``, ``bump:<a>,<b>``, ``tail:<delta>`` or ``zero``."""
    kind, _, body = tag.strip().partition(":")
    kind = kind.lower()
    try:
        values = [float(v) for v in body.split(",")] if body else []
    except ValueError:
        raise ConfigError(f"cannot parse numbers in test function {tag!r}") from None
    if kind == "zero" and not values:
        return TestFunction("zero")
    if kind == "powexp" and len(values) == 1 and values[0] > 0.0:
        return TestFunction("powexp", gamma=values[0])
    if kind == "bump" and len(values) == 2 and 0.0 < values[0] < values[1]:
        return TestFunction("bump", a=values[0], b=values[1])
    if kind == "tail" and len(values) == 1 and values[0] > 0.0:
        return TestFunction("tail", a=values[0])
    raise ConfigError(f"unknown or malformed test function {tag!r}")


def levy_integral(exp: LaplaceExponent, f: TestFunction) -> float:
    """int_0^inf f(x) nu(x) dx by quadrature."""
    if f.kind == "zero":
        return 0.0
    if f.kind == "tail":
        return float(levy_tail(exp, f.a))
    if f.kind == "bump":
        value, _ = integrate.quad(lambda x: float(f(x)) * float(levy_density(exp, x)), f.a, f.b, limit=200)
        return value
    beta = leading_index(exp)
    # on (0, 1] f(x) nu(x) = e^{-x} x^gamma nu(x); pull out x^{gamma - 1 - beta}
    near, _ = integrate.quad(
        lambda x: math.exp(-x) * float(levy_density_scaled(exp, x)),
        0.0, 1.0, weight="alg", wvar=(f.gamma - 1.0 - beta, 0.0), epsrel=1e-11, limit=200,
    )
    far, _ = integrate.quad(lambda x: math.exp(-x) * float(levy_density(exp, x)), 1.0, math.inf, epsrel=1e-11)
    return near + far


def levy_integral_closed_form(beta: float, gamma: float) -> float:
    """int min(x,1)^gamma e^{-x} nu(dx) for phi = s^beta, by incomplete gamma functions."""
    if not gamma > beta:
        raise HypothesisViolation(f"need gamma > beta for a finite integral, got gamma={gamma!r}, beta={beta!r}")
    a = gamma - beta
    lower = special.gamma(a) * special.gammainc(a, 1.0)
    return beta / special.gamma(1.0 - beta) * (lower + float(upper_gamma_negative(beta, 1.0)))


# ---------------------------------------------------------------------------
# Convergence of P(D_t in dx) / t to nu(dx)
# ---------------------------------------------------------------------------

def _levy_kernel(exp: LaplaceExponent, f: TestFunction, t: float, stream: RandomStream, size: int) -> np.ndarray:
    x, w = sample_subordinator_weighted(exp, t, stream, size, TailTilt(horizon=f.horizon))
    return f(x) * w / t


def check_levy_convergence(
    exp: LaplaceExponent,
    f: str,
    t_ladder: Sequence[float],
    n: int,
    stream: RandomStream,
    workers: int = 1,
    tolerance: float = DEFAULT_TOLERANCE,
) -> LadderReport:
    """E[f(D_t)] / t along the ladder against int f d nu."""
    func = parse_test_function(f) if isinstance(f, str) else f
    beta = leading_index(exp)
    if func.kind == "powexp" and not func.gamma > beta:
        raise HypothesisViolation(
            f"powexp:{func.gamma:g} is not integrable against nu of {format_exponent(exp)!r}; need gamma > {beta:g}"
        )
    ts = _check_ladder(t_ladder)
    target = levy_integral(exp, func)
    points = []
    for t in ts:
        st = run_blocks(functools.partial(_levy_kernel, exp, func, float(t)), n, stream, workers)
        points.append((float(t), st.mean, st.stderr))
    _, final, se = points[-1]
    passed = _within(final, target, se, tolerance)
    logger.info("levy convergence %s: %.6g vs %.6g (%s)", format_exponent(exp), final, target, passed)
    return LadderReport(f"levy-convergence {format_exponent(exp)} {f}", points, final, target, tolerance, passed)


# ---------------------------------------------------------------------------
# Small-ball probabilities
# ---------------------------------------------------------------------------

def _tilt_for_mean(exp: LaplaceExponent, delta: float, t: float) -> float:
    """theta with delta phi'(theta) = t, capped so tempered draws need at most MAX_TILT_CHUNKS chunks."""
    def gap(log_theta: float) -> float:
        return math.log(delta * float(phi_derivative(exp, math.exp(log_theta)))) - math.log(t)

    lo, hi = -10.0, 10.0
    while gap(lo) < 0.0:
        lo -= 10.0
        if lo < -200.0:
            return 0.0  # untilted mean already below t
    while gap(hi) > 0.0:
        hi += 10.0
    theta = math.exp(optimize.brentq(gap, lo, hi, xtol=1e-12))
    cap = min((MAX_TILT_CHUNKS / (delta * w)) ** (1.0 / b) for b, w in components(exp))
    if theta > cap:
        logger.warning("tilt %.3g capped at %.3g; hits at t=%g will be rarer", theta, cap, t)
    return min(theta, cap)


def _tilted_log_weights(
    exp: LaplaceExponent, delta: float, t: float, theta: float, stream: RandomStream, size: int
) -> np.ndarray:
    """log of 1{D <= t} dP/dQ under Q = exponential tilt by theta; -inf off the event."""
    rng = stream.generator()
    if theta <= 0.0:
        x = np.asarray(sample_subordinator(exp, delta, rng, size))
    elif isinstance(exp, TemperedStable):
        x = sample_tempered(exp.beta, exp.theta + theta, delta, rng, size)
    else:
        x = np.zeros(size)
        for beta, weight in components(exp):
            x = x + sample_tempered(beta, theta, weight * delta, rng, size)
    log_lr = theta * x - delta * float(phi(exp, theta)) if theta > 0.0 else np.zeros(size)
    return np.where(x <= t, log_lr, -np.inf)


def small_ball_log_probability(
    exp: LaplaceExponent, delta: float, t: float, n: int, stream: RandomStream, workers: int = 1
) -> Tuple[float, float, int]:
    """(log P(D_delta <= t), its standard error, number of tilted hits)."""
    theta = _tilt_for_mean(exp, delta, t)
    log_w = collect_blocks(functools.partial(_tilted_log_weights, exp, delta, t, theta), n, stream, workers)
    hits = int(np.count_nonzero(np.isfinite(log_w)))
    if hits < MIN_TILTED_HITS:
        raise LadderError(
            f"only {hits} tilted hits of D_{delta:g} <= {t:g} in {n} paths; ladder too deep"
        )
    log_p = float(special.logsumexp(log_w) - math.log(n))
    log_second = float(special.logsumexp(2.0 * log_w) - math.log(n))
    relative_var = max(math.exp(log_second - 2.0 * log_p) - 1.0, 0.0)
    return log_p, math.sqrt(relative_var / n), hits


def check_small_ball(
    exp: LaplaceExponent,
    delta: float,
    t_ladder: Sequence[float],
    n: int,
    stream: RandomStream,
    workers: int = 1,
    tolerance: float = SLOPE_TOLERANCE,
) -> LadderReport:
    """Slope of log(-log P(D_delta <= t)) against log(1/t); target beta / (1 - beta)."""
    if not delta > 0.0:
        raise DomainError(f"delta must be > 0, got {delta!r}")
    ts = _check_ladder(t_ladder, minimum=2)
    points = []
    for t in ts:
        log_p, se_log, hits = small_ball_log_probability(exp, delta, float(t), n, stream, workers)
        if not log_p < 0.0:
            raise LadderError(f"P(D_{delta:g} <= {t:g}) estimated as 1; start the ladder lower")
        logger.debug("small ball t=%g: log p=%.6g (%d hits)", t, log_p, hits)
        points.append((float(t), math.log(-log_p), se_log / abs(log_p)))
    x = np.log(1.0 / ts)
    y = np.array([p[1] for p in points])
    slope = float(np.polyfit(x, y, 1)[0])
    beta = leading_index(exp)
    target = beta / (1.0 - beta)
    passed = abs(slope - target) <= tolerance
    logger.info("small-ball slope %s: %.4g vs %.4g (%s)", format_exponent(exp), slope, target, passed)
    return LadderReport(
        f"small-ball {format_exponent(exp)} delta={delta:g}", points, slope, target, tolerance, passed, "slope"
    )


# ---------------------------------------------------------------------------
# Heat kernel bound p(t, x) <= c t x^{-1} phi(1/x)
# ---------------------------------------------------------------------------

def _clock_kernel(exp: LaplaceExponent, t: float, stream: RandomStream, size: int) -> np.ndarray:
    return sample_subordinator(exp, t, stream, size)


def _bound_profile(exp, t, edges, n, stream, workers, min_count):
    draws = collect_blocks(functools.partial(_clock_kernel, exp, float(t)), n, stream, workers)
    counts, _ = np.histogram(draws, bins=edges)
    widths = np.diff(edges)
    centres = np.sqrt(edges[:-1] * edges[1:])
    density = counts / (n * widths)
    bound = t / centres * np.asarray(phi(exp, 1.0 / centres))
    ratio = density / bound
    error = np.sqrt(counts) / (n * widths) / bound
    trusted = counts >= min_count
    return centres, ratio, error, trusted


def check_heat_kernel_bound(
    exp: LaplaceExponent,
    t: float,
    x_grid: Sequence[float],
    n: int,
    stream: RandomStream,
    workers: int = 1,
    min_count: int = 10,
) -> LadderReport:
    """Histogram of D_t over bins with edges ``x_grid`` divided by t x^{-1} phi(1/x).

    Passes when the largest ratio over well-populated bins is finite and
    moves by less than a factor 2 when t is halved. Empty bins count as 0.
    """
    edges = np.asarray(list(x_grid), dtype=float)
    if edges.size < 2 or np.any(edges <= 0.0) or np.any(np.diff(edges) <= 0.0):
        raise DomainError(f"x_grid must be increasing positive bin edges, got {edges.tolist()!r}")
    if not t > 0.0:
        raise DomainError(f"time t must be > 0, got {t!r}")
    centres, ratio, error, trusted = _bound_profile(exp, t, edges, n, stream, workers, min_count)
    _, ratio_half, _, trusted_half = _bound_profile(exp, t / 2.0, edges, n, stream.child(stream.stream_key + 1), workers, min_count)
    peak = float(np.max(ratio[trusted])) if trusted.any() else 0.0
    peak_half = float(np.max(ratio_half[trusted_half])) if trusted_half.any() else 0.0
    passed = (
        math.isfinite(peak) and peak > 0.0 and peak_half > 0.0
        and abs(math.log(peak / peak_half)) <= math.log(2.0)
    )
    points = [(float(x), float(r), float(e)) for x, r, e in zip(centres, ratio, error)]
    return LadderReport(
        f"heat-kernel-bound {format_exponent(exp)} t={t:g}", points, peak, peak_half, math.log(2.0), passed,
        "bound", {"peak_half_t": peak_half},
    )


# ---------------------------------------------------------------------------
# Inverse subordinator moments
# ---------------------------------------------------------------------------

def _inverse_kernel(spec: TimeChangeSpec, t: float, stream: RandomStream, size: int) -> np.ndarray:
    return np.asarray(sample_inverse(spec, t, stream, size))


def check_inverse_moments(
    exp: LaplaceExponent,
    p: float,
    t_ladder: Sequence[float],
    n: int,
    stream: RandomStream,
    workers: int = 1,
    tolerance: float = DEFAULT_TOLERANCE,
    delta: float = 1.0,
    grid_step: Optional[float] = None,
    refine_bisections: int = DEFAULT_REFINE_BISECTIONS,
) -> LadderReport:
    """E[E_t^p] phi(1/t)^p along the ladder against Gamma(p + 1) / Gamma(p beta + 1).

    ``extras`` carries the final ratio of the delta-truncated moment to the
    full one; the check also fails when that ratio is off 1 by more than
    ``TRUNCATION_TOLERANCE``.
    """
    if not p > 0.0:
        raise DomainError(f"moment order p must be > 0, got {p!r}")
    ts = _check_ladder(t_ladder)
    spec = TimeChangeSpec(exp, TimeChangeKind.INVERSE, grid_step, refine_bisections)
    target = inverse_moment(leading_index(exp), p)
    points = []
    truncated_ratio = math.nan
    for t in ts:
        draws = collect_blocks(functools.partial(_inverse_kernel, spec, float(t)), n, stream, workers)
        scale = float(phi(exp, 1.0 / t)) ** p
        full = BlockStats.of(draws**p * scale)
        truncated = BlockStats.of(np.where(draws <= delta, draws**p, 0.0) * scale)
        truncated_ratio = truncated.mean / full.mean
        points.append((float(t), full.mean, full.stderr))
    _, final, se = points[-1]
    passed = _within(final, target, se, tolerance) and abs(truncated_ratio - 1.0) <= TRUNCATION_TOLERANCE
    logger.info("inverse moments %s p=%g: %.6g vs %.6g (%s)", format_exponent(exp), p, final, target, passed)
    return LadderReport(
        f"inverse-moments {format_exponent(exp)} p={p:g}", points, final, target, tolerance, passed,
        "limit", {"truncated_ratio": truncated_ratio},
    )


# ---------------------------------------------------------------------------
# Stable moments, running maxima, scaling
# ---------------------------------------------------------------------------

MOMENT_TILT = TailTilt(horizon=1e8)


def _stable_power_kernel(beta: float, gamma: float, stream: RandomStream, size: int) -> np.ndarray:
    if gamma <= 0.0:
        return np.asarray(sample_stable(beta, 1.0, stream, size)) ** gamma
    # plain draws of S^gamma have infinite variance once 2 gamma >= beta
    x, w = sample_subordinator_weighted(Stable(beta), 1.0, stream, size, MOMENT_TILT)
    return x**gamma * w


def check_stable_moment(
    beta: float, gamma: float, n: int, stream: RandomStream, workers: int = 1, tolerance: float = 0.0
) -> LadderReport:
    """Sample mean of (S_1)^gamma against Gamma(1 - gamma/beta) / Gamma(1 - gamma)."""
    target = stable_moment(beta, gamma)
    st = run_blocks(functools.partial(_stable_power_kernel, beta, gamma), n, stream, workers)
    passed = _within(st.mean, target, st.stderr, tolerance)
    return LadderReport(
        f"stable-moment beta={beta:g} gamma={gamma:g}", [(1.0, st.mean, st.stderr)], st.mean, target, tolerance, passed
    )


def _running_max_kernel(beta: float, kind: TimeChangeKind, stream: RandomStream, size: int) -> np.ndarray:
    rng = stream.generator()
    if kind is TimeChangeKind.INVERSE:
        horizon = np.asarray(sample_inverse(TimeChangeSpec(Stable(beta), kind), 1.0, rng, size))
        weights = np.ones(size)
    else:
        horizon, weights = sample_subordinator_weighted(Stable(beta), 1.0, rng, size, MOMENT_TILT)
    # sup_{u <= s} B_u has the law of |B_s| = sqrt(2 s) |N| for generator Delta
    return np.sqrt(2.0 * horizon) * np.abs(rng.standard_normal(size)) * weights


def check_running_max(
    beta: float,
    kind: TimeChangeKind,
    n: int,
    stream: RandomStream,
    workers: int = 1,
    tolerance: float = 0.0,
) -> LadderReport:
    """Monte Carlo E[sup_{u <= U_1} B_u] against ``running_max_constant``."""
    kind = TimeChangeKind(kind)
    target = running_max_constant(kind, beta)
    st = run_blocks(functools.partial(_running_max_kernel, beta, kind), n, stream, workers)
    passed = _within(st.mean, target, st.stderr, tolerance)
    return LadderReport(
        f"running-max {kind.value} beta={beta:g}", [(1.0, st.mean, st.stderr)], st.mean, target, tolerance, passed
    )


def check_scaling(
    exp: LaplaceExponent, t: float, n: int, stream: RandomStream, alpha: float = 0.01
) -> LadderReport:
    """Two-sample KS test of phi^{-1}(1/t) D_t against S_1 of the leading index."""
    if not t > 0.0:
        raise DomainError(f"time t must be > 0, got {t!r}")
    scaled = phi_inverse(exp, 1.0 / t) * np.asarray(sample_subordinator(exp, t, stream, n))
    reference = np.asarray(sample_stable(leading_index(exp), 1.0, stream.child(stream.stream_key + 1), n))
    result = stats.ks_2samp(scaled, reference)
    passed = bool(result.pvalue >= alpha)
    return LadderReport(
        f"scaling {format_exponent(exp)} t={t:g}", [(t, float(result.statistic), float(result.pvalue))],
        float(result.pvalue), alpha, alpha, passed, "p-value",
    )
