import math

import pytest

from tfkeyforge.errors import ConfigError
from tfkeyforge.keylength import default_security
from tfkeyforge.protocol import Intensities, KeyRateResult, ObservedCounts, ProtocolParams, SecurityParams, check, validate


def _params(**kw):
    it = kw.pop("intensities", Intensities(0.5, 0.1, 1e-4, 1 / 3, 1 / 3, 1 - 2 / 3))
    base = dict(n_rounds=1e10, p_x=0.7, alpha=math.sqrt(0.02), intensities=it)
    base.update(kw)
    return ProtocolParams(**base)


def _codes(issues):
    return {i.code for i in issues}


def test_reference_config_is_valid():
    assert validate(_params(), default_security()) == []


def test_tail_divergence_is_distinguished():
    issues = validate(_params(alpha=math.sqrt(0.5)))
    assert _codes(issues) == {"tail_divergence"}


def test_probabilities_must_normalize():
    it = Intensities(0.5, 0.1, 1e-4, 0.3, 0.3, 0.3)
    assert "normalization" in _codes(validate(_params(intensities=it)))


def test_all_issues_aggregated():
    it = Intensities(0.1, 0.5, 1e-4, 0.3, 0.3, 0.3)
    sec = SecurityParams(0.0, 1e-3, 2.0, 1e-3)
    issues = validate(_params(p_x=1.0, intensities=it, s_cut=3), sec)
    assert len(issues) >= 5
    with pytest.raises(ConfigError) as exc:
        check(_params(p_x=1.0, intensities=it, s_cut=3), sec)
    assert len(exc.value.issues) == len(issues)


def test_derived_counts():
    c = ObservedCounts(10, ((1, 2, 3), (4, 5, 6), (7, 8, 9)), 0.02)
    assert c.m_z == 45
    assert c.m_s == 55


def test_observed_counts_reject_bad_values():
    with pytest.raises(ValueError):
        ObservedCounts(-1, ((0,) * 3,) * 3, 0.0)
    with pytest.raises(ValueError):
        ObservedCounts(1, ((0,) * 3,) * 3, 1.5)


def test_zero_result():
    r = KeyRateResult.zero(1e9, "M_X = 0", m_x=0)
    assert r.key_length == 0 and r.rate == 0.0 and r.reason == "M_X = 0"
    assert r.diagnostics["m_x"] == 0
