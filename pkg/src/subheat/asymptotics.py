"""Small-time limits of time-changed heat contents and ladder rate fitting.

Every prediction is a pair (rate R(t), constant C) with

    |Omega| - Q~(t) ~ C R(t)       (spectral)
    H_{Omega,Omega^c}(t) ~ C R(t)  (regular)

as t -> 0. The regime of the leading index beta decides both:

    beta > 1/2   [phi^{-1}(1/t)]^{-1/2}   E[(S_1)^{1/2}] 2|dOmega|/sqrt(pi)
    beta = 1/2   t log(1/t)               2 w |dOmega| / pi
    beta < 1/2   t                        int (|Omega| - Q^W(u)) nu(u) du
    inverse      [phi(1/t)]^{-1/2}        |dOmega| / Gamma(1 + beta/2)

Regular constants are half the spectral ones except below 1/2, where the
constant is the nonlocal perimeter int H_{Omega,Omega^c}(u) nu(u) du.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import integrate, special

from subheat.errors import DomainError, LadderError, UnsupportedConfiguration
from subheat.exponents import (
    LaplaceExponent,
    MixedStable,
    Regime,
    Stable,
    components,
    format_exponent,
    leading_index,
    levy_density,
    levy_density_scaled,
    phi,
    phi_inverse,
    regime,
    small_lambda_integrability,
)
from subheat.oracles import (
    Disk,
    Domain,
    Interval,
    exact_H_interval,
    exact_Q_deficit_interval,
    format_domain,
    require_interval,
)
from subheat.samplers import TimeChangeKind

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

QUAD_EPSREL = 1e-11
QUAD_LIMIT = 400


def _check_index(beta: float) -> None:
    if not 0.0 < beta < 1.0:
        raise DomainError(f"index beta must lie in (0, 1), got {beta!r}")


# ---------------------------------------------------------------------------
# Rate functions
# ---------------------------------------------------------------------------

class RateKind(str, Enum):
    POWER = "power"
    T_LOG = "t_log"
    PHI_INVERSE_SQRT = "phi_inverse_sqrt"
    PHI_SQRT = "phi_sqrt"


@dataclass(frozen=True)
class RateFunction:
    """R(t): ``t^power``, ``t log(1/t)``, ``phi^{-1}(1/t)^{-1/2}`` or ``phi(1/t)^{-1/2}``."""

    kind: RateKind
    power: float = 1.0
    exponent: Optional[LaplaceExponent] = None

    def __post_init__(self) -> None:
        if self.kind in (RateKind.PHI_INVERSE_SQRT, RateKind.PHI_SQRT) and self.exponent is None:
            raise DomainError(f"rate {self.kind.value!r} needs a Laplace exponent")

    @property
    def name(self) -> str:
        if self.kind is RateKind.POWER:
            return f"t^{self.power:.6g}"
        if self.kind is RateKind.T_LOG:
            return "t*log(1/t)"
        if self.kind is RateKind.PHI_INVERSE_SQRT:
            return "phi_inv(1/t)^(-1/2)"
        return "phi(1/t)^(-1/2)"

    def _scalar(self, t: float) -> float:
        if self.kind is RateKind.POWER:
            return t**self.power
        if self.kind is RateKind.T_LOG:
            return t * math.log(1.0 / t)
        if self.kind is RateKind.PHI_INVERSE_SQRT:
            return phi_inverse(self.exponent, 1.0 / t) ** -0.5
        return float(phi(self.exponent, 1.0 / t)) ** -0.5

    def __call__(self, t: ArrayLike) -> ArrayLike:
        t_arr = np.asarray(t, dtype=float)
        if np.any(~((t_arr > 0.0) & (t_arr < 1.0))):
            raise DomainError(f"rate functions are evaluated on (0, 1), got t={t!r}")
        if t_arr.ndim == 0:
            return self._scalar(float(t_arr))
        return np.array([self._scalar(float(x)) for x in t_arr.ravel()]).reshape(t_arr.shape)

    def correction(self, t: ArrayLike) -> ArrayLike:
        """Variable the next-order correction is assumed linear in."""
        t_arr = np.asarray(t, dtype=float)
        out = 1.0 / np.log(1.0 / t_arr) if self.kind is RateKind.T_LOG else np.sqrt(t_arr)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AsymptoticPrediction:
    rate: RateFunction
    constant: float
    theorem_tag: str
    quantity: str = "spectral"

    def __post_init__(self) -> None:
        if not self.constant > 0.0:
            raise DomainError(f"limit constant must be > 0, got {self.constant!r}")


# ---------------------------------------------------------------------------
# Moments and constants
# ---------------------------------------------------------------------------

def stable_moment(beta: float, gamma: float) -> float:
    """E[(S_1)^gamma] = Gamma(1 - gamma/beta) / Gamma(1 - gamma) for gamma < beta."""
    _check_index(beta)
    if not gamma < beta:
        raise DomainError(f"stable moments exist only for gamma < beta, got gamma={gamma!r}, beta={beta!r}")
    return math.exp(special.gammaln(1.0 - gamma / beta) - special.gammaln(1.0 - gamma))


def inverse_moment(beta: float, p: float) -> float:
    """E[E_1^p] = Gamma(p + 1) / Gamma(p beta + 1) for the inverse stable subordinator."""
    _check_index(beta)
    if not p > 0.0:
        raise DomainError(f"moment order p must be > 0, got {p!r}")
    return math.exp(special.gammaln(p + 1.0) - special.gammaln(p * beta + 1.0))


def running_max_constant(kind: TimeChangeKind, beta: float) -> float:
    """E[sup_{u <= U_1} B_u] for B with generator Delta and U the stable clock or its inverse."""
    _check_index(beta)
    if TimeChangeKind(kind) is TimeChangeKind.INVERSE:
        return 1.0 / special.gamma(beta / 2.0 + 1.0)
    return stable_moment(beta, 0.5) * 2.0 / math.sqrt(math.pi)


def stable_kernel_constant(d: int, alpha: float) -> float:
    """c(d, alpha): jump density c |z|^{-d-alpha} of the rotation-invariant alpha-stable process."""
    if not 0.0 < alpha < 2.0:
        raise DomainError(f"stability index alpha must lie in (0, 2), got {alpha!r}")
    return (
        alpha * special.gamma((d + alpha) / 2.0)
        / (2.0 ** (1.0 - alpha) * math.pi ** (d / 2.0) * special.gamma(1.0 - alpha / 2.0))
    )


def stable_low_index_constant(beta: float, length: float = 1.0) -> float:
    """int (L - Q(u)) nu(u) du for phi = s^beta on an interval of length L, via zeta(2 - 2 beta)."""
    if not 0.0 < beta < 0.5:
        raise DomainError(f"closed form needs beta in (0, 1/2), got {beta!r}")
    s = 2.0 - 2.0 * beta
    return 8.0 * length ** (1.0 - 2.0 * beta) * math.pi ** (2.0 * beta - 2.0) * (1.0 - 2.0**-s) * special.zeta(s)


def stable_perimeter_interval(beta: float, length: float = 1.0) -> float:
    """Nonlocal perimeter of (0, L) for W o S^(beta), a symmetric 2 beta-stable process."""
    if not 0.0 < beta < 0.5:
        raise DomainError(f"perimeter is finite only for beta in (0, 1/2), got {beta!r}")
    alpha = 2.0 * beta
    return stable_kernel_constant(1, alpha) * 2.0 * length ** (1.0 - alpha) / (alpha * (1.0 - alpha))


def _levy_weighted_integral(exp: LaplaceExponent, g, epsrel: float) -> float:
    """int_0^inf g(u) nu(u) du for g ~ u^{1/2} at 0 and bounded at infinity."""
    beta = leading_index(exp)

    def smooth(u: float) -> float:
        u = max(u, 1e-200)
        return float(g(u)) / math.sqrt(u) * float(levy_density_scaled(exp, u))

    def tail(v: float) -> float:
        if v > 700.0:
            return 0.0
        u = math.exp(v)
        return float(g(u)) * float(levy_density(exp, u)) * u

    near, _ = integrate.quad(
        smooth, 0.0, 1.0, weight="alg", wvar=(-0.5 - beta, 0.0), epsabs=0.0, epsrel=epsrel, limit=QUAD_LIMIT,
    )
    far, _ = integrate.quad(tail, 0.0, math.inf, epsabs=0.0, epsrel=epsrel, limit=QUAD_LIMIT)
    return near + far


def low_index_spectral_constant(exp: LaplaceExponent, dom: Interval, epsrel: float = QUAD_EPSREL) -> float:
    """int_0^inf (|Omega| - Q^W(u)) nu(u) du, split at u = 1."""
    return _levy_weighted_integral(exp, lambda u: exact_Q_deficit_interval(dom, u), epsrel)


def perimeter(exp: LaplaceExponent, dom: Interval, epsrel: float = QUAD_EPSREL) -> float:
    """Per_{W o D}(Omega) = int_0^inf H_{Omega,Omega^c}(u) nu(u) du."""
    return _levy_weighted_integral(exp, lambda u: exact_H_interval(dom, u), epsrel)


def perimeter_double_quadrature(beta: float, dom: Interval) -> float:
    """int_Omega int_{Omega^c} c(1, 2 beta) |x - y|^{-1-2 beta} dy dx by two-dimensional quadrature.

    The outer variable is the distance to the right end, the inner one the
    overshoot beyond it; the left end contributes the same by symmetry.
    """
    if not 0.0 < beta < 0.5:
        raise DomainError(f"perimeter is finite only for beta in (0, 1/2), got {beta!r}")
    alpha = 2.0 * beta
    c = stable_kernel_constant(1, alpha)
    # overshoot s = r / (1 - r) maps (0, inf) onto (0, 1)
    value, _ = integrate.dblquad(
        lambda r, x: c * (x + r / (1.0 - r)) ** (-1.0 - alpha) / (1.0 - r) ** 2,
        0.0, dom.length,
        0.0, 1.0,
        epsabs=1e-12, epsrel=1e-9,
    )
    return 2.0 * value


def expansion(beta: float, coefficients: Sequence[float]) -> List[Tuple[float, float]]:
    """Map |Omega| - Q^W(t) ~ sum c_n t^{n/2} to the inverse-stable time change.

    Returns ``[(c_n Gamma(1 + n/2) / Gamma(1 + n beta/2), n beta / 2), ...]``.
    """
    _check_index(beta)
    if not coefficients:
        raise DomainError("expansion needs at least one coefficient")
    out = []
    for n, c in enumerate(coefficients, start=1):
        factor = math.exp(special.gammaln(1.0 + n / 2.0) - special.gammaln(1.0 + n * beta / 2.0))
        out.append((c * factor, n * beta / 2.0))
    return out


def rate_ordering_ratio(beta: float, t: ArrayLike) -> ArrayLike:
    """R_beta(t) / t^{beta/2}; tends to 0 with t for every beta."""
    _check_index(beta)
    t_arr = np.asarray(t, dtype=float)
    if beta > 0.5:
        rate = t_arr ** (1.0 / (2.0 * beta))
    elif beta == 0.5:
        rate = t_arr * np.log(1.0 / t_arr)
    else:
        rate = t_arr
    out = rate / t_arr ** (beta / 2.0)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Predictions
# ---------------------------------------------------------------------------

def _critical_weight(exp: LaplaceExponent) -> float:
    if isinstance(exp, MixedStable):
        beta, weight = exp.components[-1]
        if beta != 0.5 or any(b >= 0.5 for b, _ in exp.components[:-1]):
            raise UnsupportedConfiguration(
                f"critical prediction needs phi = w s^(1/2) + lower-order terms, got {format_exponent(exp)!r}"
            )
        return weight
    return 1.0


def _inverse(exp: LaplaceExponent, dom: Domain, quantity: str) -> AsymptoticPrediction:
    beta = leading_index(exp)
    constant = dom.surface / special.gamma(beta / 2.0 + 1.0)
    if quantity == "regular":
        constant /= 2.0
    return AsymptoticPrediction(RateFunction(RateKind.PHI_SQRT, exponent=exp), constant, "inverse", quantity)


def _subordinate(exp: LaplaceExponent, dom: Domain, quantity: str) -> AsymptoticPrediction:
    halve = 0.5 if quantity == "regular" else 1.0
    current = regime(exp)
    beta = leading_index(exp)
    if current is Regime.HIGH_INDEX:
        constant = stable_moment(beta, 0.5) * 2.0 * dom.surface / math.sqrt(math.pi) * halve
        rate = RateFunction(RateKind.PHI_INVERSE_SQRT, exponent=exp)
        return AsymptoticPrediction(rate, constant, "subordinate/high-index", quantity)
    if current is Regime.CRITICAL:
        constant = _critical_weight(exp) * 2.0 * dom.surface / math.pi * halve
        return AsymptoticPrediction(RateFunction(RateKind.T_LOG), constant, "subordinate/critical", quantity)
    if isinstance(dom, Disk):
        raise UnsupportedConfiguration(
            f"index {beta:g} below 1/2 needs an interval oracle, got {format_domain(dom)!r}"
        )
    if not small_lambda_integrability(exp):
        raise UnsupportedConfiguration(
            f"int_0 phi(l)/l dl diverges for {format_exponent(exp)!r}; no linear-rate limit"
        )
    if quantity == "regular":
        constant, tag = perimeter(exp, dom), "subordinate/low-index/perimeter"
    else:
        constant, tag = low_index_spectral_constant(exp, dom), "subordinate/low-index"
    return AsymptoticPrediction(RateFunction(RateKind.POWER, 1.0), constant, tag, quantity)


def predict_spectral(
    exp: LaplaceExponent, dom: Domain, kind: TimeChangeKind = TimeChangeKind.SUBORDINATOR
) -> AsymptoticPrediction:
    """Rate and constant of |Omega| - Q~(t) as t -> 0."""
    if TimeChangeKind(kind) is TimeChangeKind.INVERSE:
        return _inverse(exp, dom, "spectral")
    return _subordinate(exp, dom, "spectral")


def predict_regular(
    exp: LaplaceExponent, dom: Domain, kind: TimeChangeKind = TimeChangeKind.SUBORDINATOR
) -> AsymptoticPrediction:
    """Rate and constant of H_{Omega,Omega^c}(t) as t -> 0."""
    if TimeChangeKind(kind) is TimeChangeKind.INVERSE:
        return _inverse(exp, dom, "regular")
    return _subordinate(exp, dom, "regular")


def subcritical_linear_term(exp: LaplaceExponent, dom: Interval) -> float:
    """Coefficient K of the K t term that stable components of index below 1/2 add to the deficit.

    Against a t log(1/t) leading term it only fades like 1/log(1/t).
    """
    dom = require_interval(dom, "subcritical_linear_term")
    return float(sum(w * low_index_spectral_constant(Stable(b), dom) for b, w in components(exp) if b < 0.5))


# ---------------------------------------------------------------------------
# Ladder fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    """Ratios y(t)/R(t) along a ladder and their extrapolated limit.

    ``passed`` compares the final (smallest t) ratio with the predicted
    constant; the Richardson and least-squares limits are diagnostics.
    """

    points: List[Tuple[float, float, float]]
    target: float
    final_ratio: float
    final_stderr: float
    richardson_limit: float
    least_squares_limit: float
    deviation: float
    tolerance: float
    passed: bool
    monotone: bool = field(default=False)


def fit_rate(
    samples: Sequence[Tuple[float, float, float]],
    prediction: AsymptoticPrediction,
    tolerance: float = 0.02,
) -> FitReport:
    """Fit ``(t, y, stderr)`` samples, y expected ~ C R(t), against ``prediction``.

    For spectral contents y is the deficit |Omega| - Q~(t). Passes when
    |r_final - C| <= max(tolerance C, 4 stderr_final).
    """
    if len(samples) < 3:
        raise LadderError(f"rate fitting needs at least 3 ladder points, got {len(samples)}")
    ts = np.array([s[0] for s in samples], dtype=float)
    if np.any(np.diff(ts) >= 0.0):
        raise LadderError(f"ladder must be strictly decreasing in t, got {ts.tolist()!r}")
    rates = np.asarray(prediction.rate(ts), dtype=float)
    ratios = np.array([s[1] for s in samples], dtype=float) / rates
    errors = np.array([s[2] for s in samples], dtype=float) / rates

    x = np.asarray(prediction.rate.correction(ts), dtype=float)
    r1, r2 = ratios[-2], ratios[-1]
    richardson = (r2 * x[-2] - r1 * x[-1]) / (x[-2] - x[-1])
    weights = 1.0 / np.where(errors > 0.0, errors, 1.0)
    _, least_squares = np.polyfit(x, ratios, 1, w=weights)

    final, final_se = float(ratios[-1]), float(errors[-1])
    target = prediction.constant
    allowed = max(tolerance * target, 4.0 * final_se)
    gaps = np.abs(ratios - target)
    report = FitReport(
        points=[(float(t), float(r), float(e)) for t, r, e in zip(ts, ratios, errors)],
        target=target,
        final_ratio=final,
        final_stderr=final_se,
        richardson_limit=float(richardson),
        least_squares_limit=float(least_squares),
        deviation=abs(final - target) / target,
        tolerance=tolerance,
        passed=abs(final - target) <= allowed,
        monotone=bool(np.all(np.diff(gaps) <= 4.0 * np.hypot(errors[1:], errors[:-1]))),
    )
    logger.info(
        "ratio %.6g -> target %.6g (richardson %.6g, deviation %.3g, %s)",
        final, target, richardson, report.deviation, "pass" if report.passed else "FAIL",
    )
    return report
