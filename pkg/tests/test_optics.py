import math

import pytest
from hypothesis import given, strategies as st

from photostat.optics import (
    OpticsParams,
    coherence_time,
    coherence_time_check,
    gdd_broadening,
    temporal_mode_count,
)


def test_coherence_time_for_50nm():
    tau = coherence_time(OpticsParams(1600.0, 50.0))
    assert tau == pytest.approx(1600.0**2 / (299.792458 * 50.0))
    assert abs(tau / 170 - 1) < 0.1


def test_broadband_convention_flagged():
    check = coherence_time_check(OpticsParams(1600.0, 500.0), 14.0)
    assert check["coherence_time_fs"] == pytest.approx(17.08, abs=0.01)
    assert not check["within_10_percent"]
    assert coherence_time_check(OpticsParams(1600.0, 50.0), 170.0)["within_10_percent"]


@given(st.floats(1.0, 400.0))
def test_doubling_bandwidth_halves_time(bw):
    a = coherence_time(OpticsParams(1600.0, bw))
    b = coherence_time(OpticsParams(1600.0, 2 * bw))
    assert a == pytest.approx(2 * b, rel=1e-12)


def test_invalid_params():
    with pytest.raises(ValueError):
        OpticsParams(1600.0, 0.0)
    with pytest.raises(ValueError):
        OpticsParams(-1.0, 50.0)


@pytest.mark.parametrize("window,tau,expected", [(10.0, 170.0, 1), (170.0, 170.0, 1),
                                                 (3400.0, 170.0, 20), (3401.0, 170.0, 21)])
def test_temporal_modes(window, tau, expected):
    assert temporal_mode_count(window, tau) == expected


def test_temporal_modes_domain():
    with pytest.raises(ValueError):
        temporal_mode_count(0.0, 170.0)


def test_gdd_values():
    assert gdd_broadening(13.0, 0.0) == 1.0
    assert gdd_broadening(13.0, -400.0) == pytest.approx(6.6, abs=0.05)
    assert gdd_broadening(13.0, -300.0) == pytest.approx(5.0, abs=0.1)
    assert gdd_broadening(13.0, -500.0) == pytest.approx(8.2, abs=0.1)
    # formula oracle
    x = 4 * math.log(2) * 300.0 / 13.0**2
    assert gdd_broadening(13.0, 300.0) == pytest.approx(math.sqrt(1 + x * x), rel=1e-15)


@given(st.floats(0.0, 1e4), st.floats(0.0, 1e4))
def test_gdd_monotone(a, b):
    lo, hi = sorted((a, b))
    assert gdd_broadening(13.0, -lo) <= gdd_broadening(13.0, -hi)


def test_gdd_domain():
    with pytest.raises(ValueError):
        gdd_broadening(0.0, 100.0)
