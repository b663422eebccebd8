import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calhack.detector import (ATTACK_T0, ATTACK_T1, DetectorPair, DetectorParams, EfficiencyCurve,
                              SampledCurve, check_defaults, click_probability, curve_from_dict,
                              default_hacked_pair, default_intrinsic_pair, efficiency_at,
                              mismatch_ratio)
from calhack.errors import InvalidArgument


def test_efficiency_peak_and_tails():
    pair = default_hacked_pair()
    c0 = pair.d0_curve
    assert efficiency_at(c0, c0.center) == pytest.approx(0.076)
    assert float(pair.eta(0, ATTACK_T0)) == pytest.approx(4.4e-3, rel=0.02)
    far = [float(pair.eta(0, t)) for t in (2.0, 3.0, 4.0, 6.0)]
    assert all(b < a for a, b in zip(far, far[1:]))
    assert far[-1] < 1e-12


def test_gate_delay_shifts_curve():
    c = EfficiencyCurve(0.07, 0.0, 0.3, 0.5)
    assert efficiency_at(c, 0.4, gate_delay=0.4) == pytest.approx(0.07)


def test_click_probability_example():
    p = click_probability(25.0, 0.0044, 2.4e-4)
    assert p == pytest.approx(0.1044, abs=1e-4)


def test_click_probability_against_photon_sampling():
    # independent route: Poisson photons thinned by eta, OR'ed with a dark count
    rng = np.random.default_rng(12)
    n = 10_000_000
    detected = rng.binomial(rng.poisson(25.0, n), 0.0044) > 0
    clicks = detected | (rng.random(n) < 2.4e-4)
    p = click_probability(25.0, 0.0044, 2.4e-4)
    sigma = math.sqrt(p * (1 - p) / n)
    assert abs(clicks.mean() - p) < 3 * sigma


def test_click_probability_limits():
    assert click_probability(0.0, 0.5, 1e-3) == pytest.approx(1e-3)
    assert click_probability(1e4, 0.5, 0.0) == pytest.approx(1.0)
    out = click_probability(np.array([0.0, 1.0]), 0.1, 0.0)
    assert out.shape == (2,)


@pytest.mark.parametrize("args", [(-1.0, 0.1, 0.0), (1.0, 1.5, 0.0), (1.0, 0.1, 1.0),
                                  (1.0, -0.1, 0.0)])
def test_click_probability_rejects_bad_inputs(args):
    with pytest.raises(InvalidArgument):
        click_probability(*args)


@settings(max_examples=100, deadline=None)
@given(mu=st.floats(0, 500), dmu=st.floats(0, 50), eta=st.floats(0, 1),
       dark=st.floats(0, 0.5))
def test_click_probability_monotone_in_mu(mu, dmu, eta, dark):
    a = click_probability(mu, eta, dark)
    b = click_probability(mu + dmu, eta, dark)
    assert dark - 1e-15 <= a <= b + 1e-15 <= 1 + 1e-15


def test_mismatch_ratio_examples():
    same = EfficiencyCurve(0.07, 0.0, 0.3, 0.5)
    flat = DetectorPair(same, same, DetectorParams(), DetectorParams())
    assert mismatch_ratio(flat, 0.7) == pytest.approx(0.0, abs=1e-12)
    hacked = default_hacked_pair()
    assert mismatch_ratio(hacked, ATTACK_T0) >= 1.3
    assert mismatch_ratio(hacked, ATTACK_T1) <= -1.3


def test_mismatch_ratio_blind_detectors():
    blind = EfficiencyCurve(0.0, 0.0, 0.3, 0.3)
    live = EfficiencyCurve(0.05, 0.0, 0.3, 0.3)
    p = DetectorParams()
    assert mismatch_ratio(DetectorPair(live, blind, p, p), 0.0) == math.inf
    assert mismatch_ratio(DetectorPair(blind, live, p, p), 0.0) == -math.inf
    assert math.isnan(mismatch_ratio(DetectorPair(blind, blind, p, p), 0.0))


@settings(max_examples=50, deadline=None)
@given(t=st.floats(-3, 3), a=st.floats(0.01, 0.1), b=st.floats(0.01, 0.1),
       sl=st.floats(0.1, 1), sr=st.floats(0.1, 1))
def test_mismatch_ratio_mirror_symmetry(t, a, b, sl, sr):
    p = DetectorParams()
    c0, c1 = EfficiencyCurve(a, 0.2, sl, sr), EfficiencyCurve(b, -0.2, sr, sl)
    # mirror in time and swap the detectors
    m0, m1 = EfficiencyCurve(b, 0.2, sl, sr), EfficiencyCurve(a, -0.2, sr, sl)
    r = mismatch_ratio(DetectorPair(c0, c1, p, p), t)
    r_mirror = mismatch_ratio(DetectorPair(m0, m1, p, p), -t)
    if math.isfinite(r):
        assert r_mirror == pytest.approx(-r, abs=1e-9)


def test_defaults_meet_their_constraints():
    assert check_defaults() == []
    ratio0 = float(default_hacked_pair().eta(0, ATTACK_T0) / default_hacked_pair().eta(1, ATTACK_T0))
    assert ratio0 >= 20


def test_check_defaults_reports_weak_mismatch():
    same = EfficiencyCurve(0.07, 0.0, 0.4, 0.4)
    pair = DetectorPair(same, same, DetectorParams(), DetectorParams())
    assert any("mismatch" in p for p in check_defaults(pair))


def test_pair_roundtrip_through_dict():
    pair = default_intrinsic_pair().with_gate_delays(0.1, -0.2)
    again = DetectorPair.from_dict(pair.to_dict())
    assert again == pair


def test_sampled_curve_interpolates_and_vanishes_outside():
    c = SampledCurve(0.0, 0.5, (0.0, 0.02, 0.04))
    assert float(c(0.75)) == pytest.approx(0.03)
    assert float(c(-1.0)) == 0.0 and float(c(2.0)) == 0.0
    assert curve_from_dict(c.to_dict()) == c


def test_intrinsic_curves_are_centered_on_gate():
    pair = default_intrinsic_pair()
    assert pair.d0_curve.center == 0.0 and pair.d1_curve.center == 0.0
