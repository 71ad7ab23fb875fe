"""Tests for subordinator and inverse-subordinator samplers.

Distributional checks compare Monte Carlo Laplace transforms and moments
with their closed forms at 4 standard errors; every stream is seeded, so
each check is deterministic.
"""

import math

import numpy as np
import pytest
from scipy import special, stats

from conftest import within
from subheat.errors import DomainError, SamplerRunaway
from subheat.exponents import MixedStable, Stable, TemperedStable, phi
from subheat.samplers import (
    TailTilt,
    TimeChangeKind,
    TimeChangeSpec,
    sample_inverse,
    sample_mixed,
    sample_stable,
    sample_subordinator,
    sample_subordinator_weighted,
    sample_tempered,
    sample_tilted_stable,
    sample_time_change,
)
from subheat.streams import RandomStream

N = 1 << 17


def laplace_check(draws, s, expected, weights=None):
    values = np.exp(-s * draws) * (1.0 if weights is None else weights)
    stderr = values.std(ddof=1) / math.sqrt(values.size)
    return within(values.mean(), expected, stderr), (values.mean(), expected, stderr)


# ============================================================================
# Stable
# ============================================================================

@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75])
def test_stable_laplace_transform(beta):
    """Test 1: E[exp(-s S_t)] = exp(-t s^beta) on an (s, t) grid."""
    for key, (s, t) in enumerate([(0.5, 1.0), (1.0, 0.3), (4.0, 2.0)]):
        draws = sample_stable(beta, t, RandomStream(11, key), N)
        ok, detail = laplace_check(draws, s, math.exp(-t * s**beta))
        assert ok, detail


def test_half_stable_is_inverse_squared_normal():
    """Test 2: S_1 at beta = 1/2 has the law of 1 / (2 Z^2), CDF erfc(1 / (2 sqrt(x)))."""
    draws = sample_stable(0.5, 1.0, RandomStream(12), N)
    result = stats.kstest(draws, lambda x: special.erfc(1.0 / (2.0 * np.sqrt(x))))
    assert result.pvalue > 1e-3, result


def test_stable_self_similarity():
    """Test 3: S_4 / 4^{1/beta} and S_1 pass a two-sample KS test."""
    beta = 0.75
    scaled = sample_stable(beta, 4.0, RandomStream(13, 0), 100_000) / 4.0 ** (1.0 / beta)
    plain = sample_stable(beta, 1.0, RandomStream(13, 1), 100_000)
    assert stats.ks_2samp(scaled, plain).pvalue >= 0.01


def test_stable_scalar_and_errors(stream):
    """Test 4: scalar in, scalar out; bad beta and t rejected."""
    assert isinstance(sample_stable(0.5, 1.0, stream), float)
    with pytest.raises(DomainError):
        sample_stable(1.2, 1.0, stream, 4)
    with pytest.raises(DomainError):
        sample_stable(0.5, 0.0, stream, 4)


# ============================================================================
# Tempered and mixed
# ============================================================================

def test_tempered_mean():
    """Test 5: E[D_1] = beta theta^(beta-1) = 0.5 for (0.5, 1)."""
    draws = sample_tempered(0.5, 1.0, 1.0, RandomStream(14), N)
    assert within(draws.mean(), 0.5, draws.std(ddof=1) / math.sqrt(N))


def test_tempered_laplace_transform():
    """Test 6: transform at s = 1 matches exp(-t phi(1))."""
    exp = TemperedStable(0.5, 1.0)
    draws = sample_tempered(0.5, 1.0, 1.0, RandomStream(15), N)
    ok, detail = laplace_check(draws, 1.0, math.exp(-phi(exp, 1.0)))
    assert ok, detail


def test_tempered_chunked_when_t_theta_beta_large():
    """Test 7: t theta^beta = 10 splits into chunks; the mean is still t beta theta^(beta-1)."""
    draws = sample_tempered(0.5, 4.0, 5.0, RandomStream(16), 1 << 15)
    assert within(draws.mean(), 1.25, draws.std(ddof=1) / math.sqrt(draws.size))


def test_tempered_small_theta_recovers_stable():
    """Test 8: theta -> 0 gives back the stable law."""
    tempered = sample_tempered(0.5, 1e-12, 1.0, RandomStream(17, 0), 50_000)
    stable = sample_stable(0.5, 1.0, RandomStream(17, 1), 50_000)
    assert stats.ks_2samp(tempered, stable).pvalue >= 0.01


def test_tilted_stable_likelihood_ratio():
    """Test 9: exp(log_lr) reweights tilted draws back to the stable transform."""
    x, log_lr = sample_tilted_stable(0.5, 1.0, 2.0, RandomStream(18), N)
    ok, detail = laplace_check(x, 1.0, math.exp(-1.0), np.exp(log_lr))
    assert ok, detail


def test_mixed_laplace_transform_and_dominance():
    """Test 10: transform of w1 s^b1 + w2 s^b2; the sum dominates its 3/4 component."""
    comps = ((0.25, 1.0), (0.75, 2.0))
    draws = sample_mixed(comps, 0.5, RandomStream(19), N)
    ok, detail = laplace_check(draws, 2.0, math.exp(-0.5 * phi(MixedStable(comps), 2.0)))
    assert ok, detail

    rng = RandomStream(20).generator()
    pair = np.zeros(1000)
    for beta, w in comps:
        piece = sample_stable(beta, w, rng, 1000)
        if beta == 0.75:
            alone = piece
        pair = pair + piece
    assert np.all(pair >= alone)


def test_sample_subordinator_dispatch(stream):
    """Test 11: one entry point for the three families, shape follows size."""
    for exp in (Stable(0.5), TemperedStable(0.5, 1.0), MixedStable(((0.25, 1.0), (0.5, 1.0)))):
        draws = sample_subordinator(exp, 1.0, stream, 8)
        assert draws.shape == (8,)
        assert np.all(draws > 0.0)


# ============================================================================
# Importance-weighted draws
# ============================================================================

@pytest.mark.parametrize("exp", [Stable(0.25), TemperedStable(0.5, 1.0), MixedStable(((0.25, 1.0), (0.5, 1.0)))])
def test_weighted_draws_are_unbiased(exp):
    """Test 12: E[w] = 1 and E[exp(-s x) w] = exp(-t phi(s)) under the tail tilt."""
    t = 1e-3
    x, w = sample_subordinator_weighted(exp, t, RandomStream(21), N, TailTilt(horizon=1.0))
    assert within(w.mean(), 1.0, w.std(ddof=1) / math.sqrt(N))
    s = 1e3
    ok, detail = laplace_check(x, s, math.exp(-t * phi(exp, s)), w)
    assert ok, detail


def test_weights_bounded_by_mixture():
    """Test 13: each defensive mixture caps its likelihood ratio at 1/mix."""
    _, w = sample_subordinator_weighted(Stable(0.5), 1e-6, RandomStream(22), N, TailTilt(horizon=1.0))
    assert w.max() <= 4.0 + 1e-9
    _, plain = sample_subordinator_weighted(Stable(0.5), 1e-6, RandomStream(22), 16)
    assert np.all(plain == 1.0)


def test_tilt_reaches_the_horizon():
    """Test 14: the tilted law puts far more mass beyond the horizon than the plain law."""
    t = 1e-6
    tilted, _ = sample_subordinator_weighted(Stable(0.75), t, RandomStream(23), 1 << 14, TailTilt(horizon=1.0))
    plain = sample_stable(0.75, t, RandomStream(24), 1 << 14)
    assert np.mean(tilted > 1.0) > 0.05
    assert np.mean(plain > 1.0) < 0.01


def test_tilt_switches_off_past_the_horizon():
    """Test 22: once t alone reaches the horizon the tilt is the identity and weights are exactly 1."""
    assert TailTilt(horizon=1.0).exponents(0.75, 50.0) == (1.0, 1.0)
    a, b = TailTilt(horizon=1.0).exponents(0.75, 1e-6)
    assert 0.0 < a < 1.0 and 0.0 < b < a
    _, w = sample_subordinator_weighted(Stable(0.75), 50.0, RandomStream(25), 4096, TailTilt(horizon=1.0))
    assert np.all(w == 1.0)


# ============================================================================
# Inverse subordinators
# ============================================================================

def test_inverse_stable_mean():
    """Test 15: E[E_1] = Gamma(2) / Gamma(1.5) = 2 / sqrt(pi) for beta = 1/2."""
    spec = TimeChangeSpec(Stable(0.5), TimeChangeKind.INVERSE)
    draws = sample_inverse(spec, 1.0, RandomStream(25), N)
    assert within(draws.mean(), 2.0 / math.sqrt(math.pi), draws.std(ddof=1) / math.sqrt(N))


def test_inverse_stable_monotone_along_a_path():
    """Test 16: E_s <= E_t for s < t when both come from the same stream."""
    spec = TimeChangeSpec(Stable(0.75), TimeChangeKind.INVERSE)
    early = sample_inverse(spec, 0.5, RandomStream(26), 1000)
    late = sample_inverse(spec, 1.0, RandomStream(26), 1000)
    assert np.all(early <= late)
    assert np.any(early < late)


def test_grid_inverse_matches_exact_sampler():
    """Test 17: the first-passage search on a one-component mixture reproduces the stable mean."""
    spec = TimeChangeSpec(MixedStable(((0.5, 1.0),)), TimeChangeKind.INVERSE, grid_step=1e-3, refine_bisections=12)
    draws = sample_inverse(spec, 1.0, RandomStream(27), 1 << 14)
    target = 2.0 / math.sqrt(math.pi)
    assert within(draws.mean(), target, draws.std(ddof=1) / math.sqrt(draws.size), fraction=0.005)


def test_grid_inverse_tempered_converges_in_grid_step():
    """Test 18: shrinking the grid step moves E[E_1] by less than the MC error."""
    exp = TemperedStable(0.5, 1.0)
    means = []
    for step in (1e-2, 1e-3):
        spec = TimeChangeSpec(exp, TimeChangeKind.INVERSE, grid_step=step)
        draws = sample_inverse(spec, 1.0, RandomStream(28), 1 << 13)
        means.append((draws.mean(), draws.std(ddof=1) / math.sqrt(draws.size)))
    (coarse, se1), (fine, se2) = means
    assert abs(coarse - fine) <= 4.0 * math.hypot(se1, se2)


def test_sample_time_change_dispatch(stream):
    """Test 19: kind decides between D_t and E_t."""
    sub = sample_time_change(TimeChangeSpec(Stable(0.5)), 1.0, stream, 4)
    inv = sample_time_change(TimeChangeSpec(Stable(0.5), TimeChangeKind.INVERSE), 1.0, stream, 4)
    assert sub.shape == inv.shape == (4,)
    with pytest.raises(DomainError):
        sample_inverse(TimeChangeSpec(Stable(0.5)), 1.0, stream, 4)


def test_time_change_spec_validation():
    """Test 20: grid_step > 0 and refine_bisections >= 0; default step is t * 1e-3."""
    with pytest.raises(DomainError):
        TimeChangeSpec(Stable(0.5), TimeChangeKind.INVERSE, grid_step=0.0)
    with pytest.raises(DomainError):
        TimeChangeSpec(Stable(0.5), TimeChangeKind.INVERSE, refine_bisections=-1)
    assert TimeChangeSpec(Stable(0.5)).resolved_grid_step(2.0) == pytest.approx(2e-3)


def test_first_passage_runaway_guard(stream):
    """Test 21: a grid far too fine for t trips the guard with exit code 4."""
    spec = TimeChangeSpec(MixedStable(((0.5, 1.0),)), TimeChangeKind.INVERSE, grid_step=1e-7)
    with pytest.raises(SamplerRunaway) as exc:
        sample_inverse(spec, 1e6, stream, 4)
    assert exc.value.exit_code == 4
