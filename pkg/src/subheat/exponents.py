"""Laplace exponents of driftless, unkilled subordinators.

Three closed families:

    stable:<beta>                    phi(s) = s^beta
    tempered:<beta>,<theta>          phi(s) = (s + theta)^beta - theta^beta
    mixed:<b1>*<w1>+<b2>*<w2>+...    phi(s) = sum_i w_i s^{b_i}   (weights default 1)

Each family has a closed-form Levy density on (0, inf), a tail
nu([delta, inf)) and a regular-variation index at infinity (the "leading
index"), which fixes the small-time regime of the heat content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np
from scipy import integrate, optimize, special

from subheat.errors import ConfigError, DomainError

ArrayLike = Union[float, np.ndarray]

PHI_INVERSE_RTOL = 1e-12


def _check_index(beta: float, what: str = "beta") -> None:
    if not 0.0 < beta < 1.0:
        raise DomainError(f"{what} must lie in (0, 1), got {beta!r}")


@dataclass(frozen=True)
class Stable:
    beta: float

    def __post_init__(self) -> None:
        _check_index(self.beta)


@dataclass(frozen=True)
class TemperedStable:
    beta: float
    theta: float

    def __post_init__(self) -> None:
        _check_index(self.beta)
        if not self.theta > 0.0:
            raise DomainError(f"tempering rate theta must be > 0, got {self.theta!r}")


@dataclass(frozen=True)
class MixedStable:
    """Independent sum of stable subordinators; ``components`` is ((beta_i, w_i), ...)."""

    components: Tuple[Tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.components:
            raise DomainError("mixed exponent needs at least one component")
        previous = 0.0
        for beta, weight in self.components:
            _check_index(beta, "component index")
            if not weight > 0.0:
                raise DomainError(f"component weight must be > 0, got {weight!r}")
            if beta <= previous:
                raise DomainError(
                    f"component indices must be strictly increasing, got {beta!r} after {previous!r}"
                )
            previous = beta


LaplaceExponent = Union[Stable, TemperedStable, MixedStable]


class Regime(str, Enum):
    HIGH_INDEX = "high-index"
    CRITICAL = "critical"
    LOW_INDEX = "low-index"


# ---------------------------------------------------------------------------
# Structure
# ---------------------------------------------------------------------------

def components(exp: LaplaceExponent) -> Tuple[Tuple[float, float], ...]:
    """Stable pieces (beta_i, w_i); a tempered exponent reports its single index."""
    if isinstance(exp, MixedStable):
        return exp.components
    return ((exp.beta, 1.0),)


def leading_index(exp: LaplaceExponent) -> float:
    """Regular-variation index of phi at infinity."""
    if isinstance(exp, MixedStable):
        return exp.components[-1][0]
    return exp.beta


def regime(exp: LaplaceExponent) -> Regime:
    beta = leading_index(exp)
    if beta == 0.5:
        return Regime.CRITICAL
    return Regime.HIGH_INDEX if beta > 0.5 else Regime.LOW_INDEX


# ---------------------------------------------------------------------------
# phi and friends
# ---------------------------------------------------------------------------

def _require_positive(value: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if np.any(~(arr > 0.0)):
        raise DomainError(f"{name} must be > 0, got {value!r}")
    return arr


def _unwrap(arr: np.ndarray) -> ArrayLike:
    return float(arr) if arr.ndim == 0 else arr


def phi(exp: LaplaceExponent, s: ArrayLike) -> ArrayLike:
    s_arr = _require_positive(s, "s")
    if isinstance(exp, Stable):
        out = s_arr ** exp.beta
    elif isinstance(exp, TemperedStable):
        # theta^beta * ((1 + s/theta)^beta - 1) keeps digits for s << theta
        out = exp.theta ** exp.beta * np.expm1(exp.beta * np.log1p(s_arr / exp.theta))
    else:
        out = sum(w * s_arr ** b for b, w in exp.components)
    return _unwrap(np.asarray(out))


def phi_derivative(exp: LaplaceExponent, s: ArrayLike) -> ArrayLike:
    s_arr = _require_positive(s, "s")
    if isinstance(exp, Stable):
        out = exp.beta * s_arr ** (exp.beta - 1.0)
    elif isinstance(exp, TemperedStable):
        out = exp.beta * (s_arr + exp.theta) ** (exp.beta - 1.0)
    else:
        out = sum(w * b * s_arr ** (b - 1.0) for b, w in exp.components)
    return _unwrap(np.asarray(out))


def mean_rate(exp: LaplaceExponent) -> float:
    """phi'(0+), i.e. E[D_1]; infinite unless the exponent is tempered."""
    if isinstance(exp, TemperedStable):
        return exp.beta * exp.theta ** (exp.beta - 1.0)
    return math.inf


def phi_inverse(exp: LaplaceExponent, y: float) -> float:
    """x with phi(x) = y; relative residual below 1e-12."""
    y = float(_require_positive(y, "y"))
    if isinstance(exp, Stable):
        return y ** (1.0 / exp.beta)
    if isinstance(exp, TemperedStable):
        scale = exp.theta ** exp.beta
        return exp.theta * math.expm1(math.log1p(y / scale) / exp.beta)

    def residual(log_x: float) -> float:
        return math.log(phi(exp, math.exp(log_x))) - math.log(y)

    # phi is increasing, so doubling from the leading-order guess brackets the root
    guess = math.log(y) / leading_index(exp)
    lo, hi = guess - 1.0, guess + 1.0
    while residual(lo) > 0.0:
        lo -= 2.0 * (hi - lo)
    while residual(hi) < 0.0:
        hi += 2.0 * (hi - lo)
    log_x = optimize.brentq(residual, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.exp(log_x)


# ---------------------------------------------------------------------------
# Levy density and tail
# ---------------------------------------------------------------------------

def _stable_density(beta: float, u: np.ndarray) -> np.ndarray:
    return beta / special.gamma(1.0 - beta) * u ** (-1.0 - beta)


def levy_density(exp: LaplaceExponent, u: ArrayLike) -> ArrayLike:
    u_arr = _require_positive(u, "u")
    if isinstance(exp, Stable):
        out = _stable_density(exp.beta, u_arr)
    elif isinstance(exp, TemperedStable):
        out = _stable_density(exp.beta, u_arr) * np.exp(-exp.theta * u_arr)
    else:
        out = sum(w * _stable_density(b, u_arr) for b, w in exp.components)
    return _unwrap(np.asarray(out))


def levy_density_scaled(exp: LaplaceExponent, u: ArrayLike) -> ArrayLike:
    """u^{1+beta} nu(u), beta the leading index; finite on [0, inf) including u = 0."""
    u_arr = np.asarray(u, dtype=float)
    if np.any(~(u_arr >= 0.0)):
        raise DomainError(f"u must be >= 0, got {u!r}")
    beta = leading_index(exp)
    if isinstance(exp, Stable):
        out = np.full_like(u_arr, beta / special.gamma(1.0 - beta))
    elif isinstance(exp, TemperedStable):
        out = beta / special.gamma(1.0 - beta) * np.exp(-exp.theta * u_arr)
    else:
        out = sum(w * b / special.gamma(1.0 - b) * u_arr ** (beta - b) for b, w in exp.components)
    return _unwrap(np.asarray(out))


def upper_gamma_negative(beta: float, z: ArrayLike) -> ArrayLike:
    """Gamma(-beta, z) for beta in (0, 1), z > 0.

    Recurrence Gamma(-b, z) = (z^{-b} e^{-z} - Gamma(1-b, z)) / b below z = 1;
    above it the two terms cancel, so use Gamma(s, z) = e^{-z} U(1-s, 1-s, z).
    """
    z_arr = _require_positive(z, "z")
    small = np.minimum(z_arr, 1.0)
    via_recurrence = (
        small ** (-beta) * np.exp(-small)
        - special.gamma(1.0 - beta) * special.gammaincc(1.0 - beta, small)
    ) / beta
    large = np.maximum(z_arr, 1.0)
    via_kummer = np.exp(-large) * special.hyperu(1.0 + beta, 1.0 + beta, large)
    return _unwrap(np.where(z_arr < 1.0, via_recurrence, via_kummer))


def levy_tail(exp: LaplaceExponent, delta: ArrayLike) -> ArrayLike:
    """nu([delta, inf))."""
    d = _require_positive(delta, "delta")
    if isinstance(exp, Stable):
        out = d ** (-exp.beta) / special.gamma(1.0 - exp.beta)
    elif isinstance(exp, TemperedStable):
        b, theta = exp.beta, exp.theta
        out = b / special.gamma(1.0 - b) * theta ** b * np.asarray(upper_gamma_negative(b, theta * d))
    else:
        out = sum(w * d ** (-b) / special.gamma(1.0 - b) for b, w in exp.components)
    return _unwrap(np.asarray(out))


def small_lambda_integrability(exp: LaplaceExponent, epsilon: float = 1.0) -> bool:
    """Whether int_0^epsilon phi(l)/l dl is finite."""
    if isinstance(exp, Stable):
        value = epsilon ** exp.beta / exp.beta
    elif isinstance(exp, MixedStable):
        value = sum(w * epsilon ** b / b for b, w in exp.components)
    else:
        value, _ = integrate.quad(lambda lam: phi(exp, lam) / lam, 0.0, epsilon, limit=200)
    return math.isfinite(value)


# ---------------------------------------------------------------------------
# Spec grammar
# ---------------------------------------------------------------------------

def _float(text: str, spec: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"cannot parse number {text!r} in exponent spec {spec!r}") from None


def parse_exponent(spec: str) -> LaplaceExponent:
    """Parse ``stable:<b>``, ``tempered:<b>,<theta>`` or ``mixed:<b1>*<w1>+...``."""
    family, sep, body = spec.strip().partition(":")
    if not sep or not body:
        raise ConfigError(f"exponent spec must look like 'family:params', got {spec!r}")
    family = family.lower()
    try:
        if family == "stable":
            return Stable(_float(body, spec))
        if family == "tempered":
            parts = body.split(",")
            if len(parts) != 2:
                raise ConfigError(f"tempered exponent needs '<beta>,<theta>', got {spec!r}")
            return TemperedStable(_float(parts[0], spec), _float(parts[1], spec))
        if family == "mixed":
            comps = []
            for term in body.split("+"):
                beta_text, _, weight_text = term.partition("*")
                weight = _float(weight_text, spec) if weight_text else 1.0
                comps.append((_float(beta_text, spec), weight))
            return MixedStable(tuple(comps))
    except DomainError as exc:
        raise ConfigError(f"invalid exponent spec {spec!r}: {exc}") from None
    raise ConfigError(f"unknown exponent family {family!r} in {spec!r}")


def format_exponent(exp: LaplaceExponent) -> str:
    if isinstance(exp, Stable):
        return f"stable:{exp.beta:g}"
    if isinstance(exp, TemperedStable):
        return f"tempered:{exp.beta:g},{exp.theta:g}"
    return "mixed:" + "+".join(f"{b:g}*{w:g}" for b, w in exp.components)
