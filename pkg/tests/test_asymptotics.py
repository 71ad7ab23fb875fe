"""Tests for small-time predictions, limit constants and ladder fitting."""

import math

import numpy as np
import pytest
from scipy import special

from subheat.asymptotics import (
    AsymptoticPrediction,
    RateFunction,
    RateKind,
    expansion,
    fit_rate,
    inverse_moment,
    low_index_spectral_constant,
    perimeter,
    perimeter_double_quadrature,
    predict_regular,
    predict_spectral,
    rate_ordering_ratio,
    running_max_constant,
    stable_low_index_constant,
    stable_moment,
    stable_perimeter_interval,
    subcritical_linear_term,
)
from subheat.errors import DomainError, LadderError, UnsupportedConfiguration
from subheat.exponents import MixedStable, Stable, TemperedStable
from subheat.oracles import Disk, Interval
from subheat.samplers import TimeChangeKind

INV = TimeChangeKind.INVERSE


# ============================================================================
# Moments
# ============================================================================

def test_stable_moment_half_index_closed_form():
    """Test 1: S_1 = 1 / (2 Z^2) at beta = 1/2, so E[S^gamma] = 2^-gamma E|Z|^(-2 gamma)."""
    for gamma in (0.25, -0.5, -1.0):
        direct = 2.0 ** -gamma * 2.0 ** -gamma * special.gamma(0.5 - gamma) / math.sqrt(math.pi)
        assert stable_moment(0.5, gamma) == pytest.approx(direct, rel=1e-12)


def test_stable_moment_and_inverse_moment_agree():
    """Test 2: E[E_1^p] = E[S_1^{-p beta}] since E_1 = S_1^{-beta}."""
    for beta, p in ((0.25, 2.0), (0.5, 1.0), (0.75, 0.5)):
        assert inverse_moment(beta, p) == pytest.approx(stable_moment(beta, -p * beta), rel=1e-12)


def test_half_moment_at_three_quarters():
    """Test 3: E[sqrt(S_1)] = Gamma(1/3) / sqrt(pi) for beta = 3/4."""
    assert stable_moment(0.75, 0.5) == pytest.approx(special.gamma(1.0 / 3.0) / math.sqrt(math.pi), rel=1e-12)
    assert stable_moment(0.75, 0.5) == pytest.approx(1.51142, abs=1e-5)


def test_moment_domain():
    """Test 4: gamma >= beta has no finite moment; p must be positive."""
    with pytest.raises(DomainError):
        stable_moment(0.5, 0.5)
    with pytest.raises(DomainError):
        inverse_moment(0.5, 0.0)


def test_running_max_constants():
    """Test 5: stable running max = 2 E[sqrt S] / sqrt(pi); inverse = 1 / Gamma(1 + beta/2)."""
    assert running_max_constant(TimeChangeKind.SUBORDINATOR, 0.75) == pytest.approx(1.70546, abs=1e-5)
    assert running_max_constant(INV, 0.5) == pytest.approx(1.0 / special.gamma(1.25))


# ============================================================================
# Predictions
# ============================================================================

def test_high_index_constant_value(unit_interval):
    """Test 6: spectral constant 2 |dOmega| E[sqrt S_1] / sqrt(pi), regular half of it."""
    spectral = predict_spectral(Stable(0.75), unit_interval)
    regular = predict_regular(Stable(0.75), unit_interval)
    assert spectral.constant == pytest.approx(3.41093, abs=1e-5)
    assert regular.constant == pytest.approx(spectral.constant / 2.0)
    assert spectral.theorem_tag == "subordinate/high-index"
    assert spectral.rate(1e-8) == pytest.approx(1e-8 ** (2.0 / 3.0), rel=1e-10)


def test_critical_constant(unit_interval):
    """Test 7: 2 |dOmega| / pi = 4 / pi, unchanged by lower-order components."""
    assert predict_spectral(Stable(0.5), unit_interval).constant == pytest.approx(4.0 / math.pi)
    mixed = MixedStable(((0.25, 1.0), (0.5, 1.0)))
    assert predict_spectral(mixed, unit_interval).constant == pytest.approx(4.0 / math.pi)
    weighted = MixedStable(((0.25, 1.0), (0.5, 3.0)))
    assert predict_spectral(weighted, unit_interval).constant == pytest.approx(12.0 / math.pi)
    assert predict_spectral(Stable(0.5), unit_interval).rate.kind is RateKind.T_LOG


def test_low_index_constant_matches_zeta_closed_form(unit_interval):
    """Test 8: quadrature constant against 8 L^{1-2b} pi^{2b-2} (1 - 2^{2b-2}) zeta(2 - 2b)."""
    for beta in (0.1, 0.25, 0.4):
        quad = low_index_spectral_constant(Stable(beta), unit_interval)
        assert quad == pytest.approx(stable_low_index_constant(beta), rel=1e-7), beta
    two = Interval(0.0, 2.0)
    assert low_index_spectral_constant(Stable(0.25), two) == pytest.approx(stable_low_index_constant(0.25, 2.0), rel=1e-7)


def test_subcritical_linear_term(unit_interval):
    """Test 21: only components below 1/2 contribute, each with its weight."""
    mixed = MixedStable(((0.25, 2.0), (0.5, 1.0)))
    assert subcritical_linear_term(mixed, unit_interval) == pytest.approx(2.0 * stable_low_index_constant(0.25), rel=1e-7)
    assert subcritical_linear_term(Stable(0.5), unit_interval) == 0.0
    with pytest.raises(UnsupportedConfiguration):
        subcritical_linear_term(mixed, Disk(1.0))


def test_perimeter_three_ways(unit_interval):
    """Test 9: heat-loss quadrature, closed form and double quadrature of the jump kernel."""
    for beta in (0.2, 0.3):
        closed = stable_perimeter_interval(beta)
        assert perimeter(Stable(beta), unit_interval) == pytest.approx(closed, rel=1e-6)
        assert perimeter_double_quadrature(beta, unit_interval) == pytest.approx(closed, rel=1e-5)


def test_low_index_prediction_tags(unit_interval):
    """Test 10: linear rate, spectral and perimeter constants."""
    spectral = predict_spectral(Stable(0.25), unit_interval)
    regular = predict_regular(Stable(0.25), unit_interval)
    assert spectral.rate(1e-3) == pytest.approx(1e-3)
    assert spectral.theorem_tag == "subordinate/low-index"
    assert regular.theorem_tag == "subordinate/low-index/perimeter"
    assert regular.constant < spectral.constant


def test_low_index_on_disk_unsupported():
    """Test 11: below 1/2 a disk has no implemented constant."""
    with pytest.raises(UnsupportedConfiguration) as exc:
        predict_spectral(Stable(0.25), Disk(1.0))
    assert exc.value.exit_code == 3


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_inverse_constant(beta, unit_interval):
    """Test 12: |dOmega| / Gamma(1 + beta/2) with rate phi(1/t)^{-1/2}."""
    prediction = predict_spectral(Stable(beta), unit_interval, INV)
    assert prediction.constant == pytest.approx(2.0 / special.gamma(1.0 + beta / 2.0))
    assert prediction.rate(1e-6) == pytest.approx(1e-6 ** (beta / 2.0), rel=1e-10)
    assert predict_regular(Stable(beta), unit_interval, INV).constant == pytest.approx(prediction.constant / 2.0)


def test_inverse_universality_constant(unit_interval):
    """Test 13: tempered (0.5, 1) shares the stable constant 2 / Gamma(1.25)."""
    prediction = predict_spectral(TemperedStable(0.5, 1.0), unit_interval, INV)
    assert prediction.constant == pytest.approx(2.2065, abs=1e-4)


def test_expansion_matches_inverse_constant(unit_interval):
    """Test 14: first coefficient of the mapped expansion equals the inverse constant to 1e-12."""
    for beta in (0.25, 0.5, 0.75):
        coefficient, power = expansion(beta, [4.0 / math.sqrt(math.pi)])[0]
        target = predict_spectral(Stable(beta), unit_interval, INV).constant
        assert abs(coefficient - target) <= 1e-12
        assert power == beta / 2.0
    terms = expansion(0.5, [1.0, 2.0, 3.0])
    assert [p for _, p in terms] == [0.25, 0.5, 0.75]


def test_rate_ordering_ratio_vanishes():
    """Test 15: the subordinate rate is o(t^{beta/2}) in every regime."""
    for beta in (0.25, 0.5, 0.75):
        ratios = rate_ordering_ratio(beta, np.array([1e-2, 1e-4, 1e-8]))
        assert np.all(np.diff(ratios) < 0.0)
        assert ratios[-1] < 0.1


def test_rate_function_domain():
    """Test 16: rates live on (0, 1); phi-based rates need an exponent."""
    rate = RateFunction(RateKind.POWER, 1.0)
    with pytest.raises(DomainError):
        rate(1.0)
    with pytest.raises(DomainError):
        RateFunction(RateKind.PHI_SQRT)
    assert RateFunction(RateKind.T_LOG).name == "t*log(1/t)"


# ============================================================================
# Ladder fitting
# ============================================================================

def synthetic(prediction, ladder, bias=0.0, stderr=1e-4):
    return [(t, (prediction.constant + bias * math.sqrt(t)) * prediction.rate(t), stderr * prediction.rate(t)) for t in ladder]


def test_fit_rate_passes_on_exact_samples():
    """Test 17: samples exactly C R(t) pass with every limit equal to C."""
    prediction = AsymptoticPrediction(RateFunction(RateKind.POWER, 0.5), 2.0, "synthetic")
    report = fit_rate(synthetic(prediction, [1e-2, 1e-4, 1e-6]), prediction)
    assert report.passed
    assert report.final_ratio == pytest.approx(2.0)
    assert report.richardson_limit == pytest.approx(2.0)
    assert report.monotone


def test_fit_rate_extrapolates_sqrt_correction():
    """Test 18: Richardson removes a sqrt(t) correction."""
    prediction = AsymptoticPrediction(RateFunction(RateKind.POWER, 1.0), 1.0, "synthetic")
    report = fit_rate(synthetic(prediction, [1e-2, 1e-3, 1e-4], bias=5.0), prediction)
    assert report.richardson_limit == pytest.approx(1.0, rel=1e-9)
    assert report.final_ratio == pytest.approx(1.05)


def test_fit_rate_fails_on_wrong_constant():
    """Test 19: a 10% offset fails a 2% tolerance."""
    prediction = AsymptoticPrediction(RateFunction(RateKind.POWER, 1.0), 1.0, "synthetic")
    wrong = AsymptoticPrediction(prediction.rate, 1.1, "synthetic")
    report = fit_rate(synthetic(wrong, [1e-2, 1e-3, 1e-4], stderr=1e-5), prediction, tolerance=0.02)
    assert not report.passed
    assert report.deviation == pytest.approx(0.1)


def test_fit_rate_ladder_checks():
    """Test 20: fewer than three points or an increasing ladder is a LadderError."""
    prediction = AsymptoticPrediction(RateFunction(RateKind.POWER, 1.0), 1.0, "synthetic")
    with pytest.raises(LadderError):
        fit_rate(synthetic(prediction, [1e-2, 1e-3]), prediction)
    with pytest.raises(LadderError):
        fit_rate(synthetic(prediction, [1e-4, 1e-3, 1e-2]), prediction)
