"""Tests for suite selection and the cheap acceptance suites.

The Monte Carlo ladder suites run at full size only under ``-m slow``.
"""

import pytest

from subheat.asymptotics import stable_low_index_constant
from subheat.commands.verify import cmd_verify, summary
from subheat.config import RunConfig
from subheat.errors import ConfigError
from subheat.suites import SUITES, SuiteResult, run_suites, select_suites


# ============================================================================
# Selection
# ============================================================================

def test_select_all_in_declared_order():
    """Test 1: 'all' runs every suite in registry order."""
    assert [name for name, _ in select_suites("all")] == list(SUITES)


def test_select_comma_list():
    """Test 2: a comma list keeps the given order and trims blanks."""
    assert [name for name, _ in select_suites("oracles, expansion")] == ["oracles", "expansion"]


def test_unknown_suite_raises_config_error():
    """Test 3: a misspelt name lists the valid ones."""
    with pytest.raises(ConfigError) as exc:
        select_suites("expansion,high-indx")
    assert "high-index" in str(exc.value)


# ============================================================================
# Cheap suites
# ============================================================================

def test_expansion_suite_passes():
    """Test 4: mapped coefficients equal the inverse constants for three indices."""
    results = run_suites(RunConfig(suite="expansion"))
    assert len(results) == 3
    assert all(r.passed for r in results)
    assert all(r.wall_time >= 0.0 for r in results)


def test_oracles_suite_passes():
    """Test 5: series switch, small-u limit, bridge walk and disk leading term."""
    results = run_suites(RunConfig(suite="oracles", quick=True))
    names = [r.name for r in results]
    assert names == ["oracles/series-switch", "oracles/small-u", "oracles/bridge", "oracles/disk"]
    assert all(r.passed for r in results), [r.to_dict() for r in results]


def test_tolerance_override_reaches_suite():
    """Test 6: per-check overrides replace the default tolerance only where named."""
    config = RunConfig(suite="oracles", quick=True, tolerances={"oracles/small-u": 0.5})
    results = {r.name: r for r in run_suites(config)}
    assert results["oracles/small-u"].tolerance == 0.5
    assert results["oracles/bridge"].tolerance == 0.005
    assert results["oracles/disk"].tolerance == 0.02


def test_verify_summary_shape():
    """Test 7: the JSON summary carries seed, quick flag and one record per check."""
    config = RunConfig(suite="expansion", seed=9)
    results = [SuiteResult("a", 1.0, 1.0, 0.0, True), SuiteResult("b", 1.0, 2.0, 0.1, False)]
    payload = summary(config, results)
    assert payload["passed"] is False
    assert payload["seed"] == 9
    assert [s["name"] for s in payload["suites"]] == ["a", "b"]
    text, passed = cmd_verify(config)
    assert passed
    assert '"passed": true' in text


# ============================================================================
# Full runs
# ============================================================================

@pytest.mark.slow
def test_determinism_suite():
    """Test 8: one and two workers produce byte-identical estimate CSV."""
    results = run_suites(RunConfig(suite="determinism"))
    assert results[0].passed


@pytest.mark.slow
@pytest.mark.parametrize("name", ["moments", "inverse", "levy-convergence", "small-ball"])
def test_quick_suites_pass(name):
    """Test 9: reduced-size runs of the moment and auxiliary-limit suites."""
    results = run_suites(RunConfig(suite=name, quick=True))
    failed = [r.to_dict() for r in results if not r.passed]
    assert not failed, failed


@pytest.mark.slow
@pytest.mark.parametrize("name", ["high-index", "critical", "low-index", "critical-mixed", "inverse-universality"])
def test_full_ladder_suites_pass(name):
    """Test 10: full path counts for the subordinate ladder suites."""
    results = run_suites(RunConfig(suite=name, workers=4))
    failed = [r.to_dict() for r in results if not r.passed]
    assert not failed, failed


@pytest.mark.slow
def test_quick_critical_mixed_passes_after_linear_term():
    """Test 11: with the s^{1/4} linear term removed the quick ladder lands within 10% of 4/pi."""
    (result,) = run_suites(RunConfig(suite="critical-mixed", quick=True))
    assert result.details["linear_term"] == pytest.approx(stable_low_index_constant(0.25), rel=1e-7)
    assert result.passed, result.to_dict()
