import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calhack.attack import (AttackParams, AttackTiming, EtaMatrix, case_click_probabilities,
                            enumerated_observables, eve_branches, faked_state_for,
                            ideal_fsa_qber, observables)
from calhack.detector import DetectorPair, DetectorParams, SampledCurve, default_hacked_pair
from calhack.errors import InvalidArgument, UndefinedQber
from calhack.montecarlo import SessionConfig, simulate_session

D = 2.4e-4
EXAMPLE = EtaMatrix(4.4e-3, 6.2e-4, 3.5e-5, 1.2e-2)


def tabulated_pair(etas: EtaMatrix, dark=D, timing=AttackTiming()) -> DetectorPair:
    """Pair whose curves take exactly the given values at the two attack times."""
    step = timing.t0 - timing.t1
    # repeat the end value so t0 is interior despite rounding in start + step
    c0 = SampledCurve(timing.t1, step, (etas.eta01, etas.eta00, etas.eta00))
    c1 = SampledCurve(timing.t1, step, (etas.eta11, etas.eta10, etas.eta10))
    return DetectorPair(c0, c1, DetectorParams(dark), DetectorParams(dark))


@pytest.mark.parametrize("basis,bit,out_basis,out_bit,t", [
    ("Z", 0, "X", 1, 1.90), ("Z", 1, "X", 0, -1.32),
    ("X", 0, "Z", 1, 1.90), ("X", 1, "Z", 0, -1.32)])
def test_faked_state_table(basis, bit, out_basis, out_bit, t):
    s = faked_state_for(basis, bit, AttackParams(65.0, 21.0))
    assert (s.basis, s.bit, s.arrival) == (out_basis, out_bit, t)
    assert s.mu == (65.0 if bit == 0 else 21.0)


def test_branch_weights():
    branches = list(eve_branches(("Z", 1)))
    assert branches == [(0.5, ("Z", 1)), (0.25, ("X", 0)), (0.25, ("X", 1))]


def test_matched_case_routes_to_opposite_detector():
    # Alice Z0, Eve Z0 -> faked X1 at t0: halves split between detectors
    c0, c1, both, loss = case_click_probabilities(("Z", 0), ("Z", 0), AttackParams(65, 21),
                                                  EXAMPLE, D, D)
    assert c0 == pytest.approx(D + (1 - D) * (1 - math.exp(-32.5 * EXAMPLE.eta00)))
    assert c1 == pytest.approx(D + (1 - D) * (1 - math.exp(-32.5 * EXAMPLE.eta10)))
    assert loss == pytest.approx((1 - c0) * (1 - c1))
    # Alice Z0, Eve X1 -> faked Z0 at t1: everything to D0
    c0, c1, _, _ = case_click_probabilities(("Z", 0), ("X", 1), AttackParams(65, 21),
                                            EXAMPLE, D, D)
    assert c1 == pytest.approx(D)
    assert c0 == pytest.approx(D + (1 - D) * (1 - math.exp(-21 * EXAMPLE.eta01)))


def test_inconsistent_measurement_is_rejected():
    with pytest.raises(InvalidArgument):
        case_click_probabilities(("Z", 0), ("Z", 1), AttackParams(1, 1), EXAMPLE, D, D)


def test_zero_brightness_gives_dark_floor():
    obs = observables(AttackParams(0.0, 0.0), EXAMPLE, D)
    eps = np.finfo(float).eps * D
    assert abs(obs.p0 - D) <= eps and abs(obs.p1 - D) <= eps
    assert obs.p_double == pytest.approx(D * D, rel=1e-9)
    assert obs.qber == pytest.approx(0.5, rel=1e-9)


def test_blinded_wrong_detector_gives_zero_qber():
    etas = EtaMatrix(0.01, 0.0, 0.0, 0.01)
    obs = observables(AttackParams(50.0, 50.0), etas, 0.0)
    assert obs.qber == pytest.approx(0.0, abs=1e-15)
    assert obs.p_arrive > 0


def test_example_operating_point():
    obs = observables(AttackParams(65.0, 21.0), EXAMPLE, D)
    assert obs.p0 == pytest.approx(0.038, rel=0.02)
    assert obs.p1 == pytest.approx(0.031, rel=0.02)
    assert 0.05 < obs.qber < 0.06


def test_example_operating_point_against_simulation():
    params = AttackParams(65.0, 21.0)
    obs = observables(params, EXAMPLE, D)
    stats = simulate_session(SessionConfig(10_000_000, attack=params,
                                           pair=tabulated_pair(EXAMPLE), seed=21))
    for emp, ana, n in ((stats.empirical_p0, obs.p0, stats.sifted),
                        (stats.empirical_p1, obs.p1, stats.sifted),
                        (stats.empirical_qber, obs.qber, stats.arrivals)):
        assert abs(emp - ana) < 3 * math.sqrt(ana * (1 - ana) / n)


def test_tabulated_pair_reproduces_etas():
    got = EtaMatrix.from_pair(tabulated_pair(EXAMPLE))
    for name in ("eta00", "eta01", "eta10", "eta11"):
        assert getattr(got, name) == pytest.approx(getattr(EXAMPLE, name), rel=1e-12)


def test_ideal_limits():
    assert ideal_fsa_qber(EtaMatrix.uniform(0.05)) == 0.5
    assert ideal_fsa_qber(EtaMatrix.from_pair(default_hacked_pair())) < 0.005


def test_ideal_limit_matches_dim_closed_form():
    etas = EtaMatrix.from_pair(default_hacked_pair())
    ideal = ideal_fsa_qber(etas)
    e = etas
    formula = 2 * (e.eta10 + e.eta01) / (e.eta00 + e.eta11 + 3 * (e.eta10 + e.eta01))
    assert ideal == pytest.approx(formula, rel=1e-12)
    dim = observables(AttackParams(1e-6, 1e-6), etas, 0.0)
    assert dim.qber == pytest.approx(ideal, rel=1e-4)


etas_st = st.builds(EtaMatrix, *(st.floats(0, 1) for _ in range(4)))
mu_st = st.floats(0, 200)


@settings(max_examples=100, deadline=None)
@given(etas=etas_st, mu0=mu_st, mu1=mu_st, d=st.floats(1e-6, 0.1))
def test_closed_form_matches_enumeration(etas, mu0, mu1, d):
    params = AttackParams(mu0, mu1)
    ana = observables(params, etas, d)
    enum = enumerated_observables(params, etas, d, d)
    for name in ("p0", "p1", "p_double", "p_error", "p_arrive"):
        assert getattr(ana, name) == pytest.approx(getattr(enum, name), abs=1e-12), name
    # the ratio is only as well conditioned as its denominator
    assert ana.qber == pytest.approx(enum.qber, abs=1e-12 / ana.p_arrive)


@settings(max_examples=100, deadline=None)
@given(etas=etas_st, mu0=mu_st, mu1=mu_st, d=st.floats(0, 0.1))
def test_probability_identities(etas, mu0, mu1, d):
    try:
        obs = observables(AttackParams(mu0, mu1), etas, d)
    except UndefinedQber:
        return
    tol = 1e-12
    assert -tol <= obs.p_double <= min(obs.p0, obs.p1) + tol
    assert -tol <= obs.p_error <= obs.p_arrive + tol
    assert obs.p_arrive <= 1 + tol
    assert max(obs.p0, obs.p1) - tol <= obs.p_arrive <= obs.p0 + obs.p1 + tol
    assert -tol <= obs.qber <= 1 + tol


@settings(max_examples=100, deadline=None)
@given(e00=st.floats(1e-3, 0.1), e11=st.floats(1e-3, 0.1), e10=st.floats(0, 0.01),
       e01=st.floats(0, 0.01), shrink=st.floats(0, 1), mu0=st.floats(1, 100),
       mu1=st.floats(1, 100), d=st.floats(0, 1e-3))
def test_blinding_the_wrong_detector_never_raises_qber(e00, e11, e10, e01, shrink, mu0, mu1, d):
    params = AttackParams(mu0, mu1)
    before = observables(params, EtaMatrix(e00, e01, e10, e11), d).qber
    after = observables(params, EtaMatrix(e00, e01 * shrink, e10 * shrink, e11), d).qber
    assert after <= before + 1e-12


def test_zero_arrival_raises():
    with pytest.raises(UndefinedQber):
        observables(AttackParams(0.0, 0.0), EXAMPLE, 0.0)
    with pytest.raises(UndefinedQber):
        enumerated_observables(AttackParams(0.0, 0.0), EXAMPLE, 0.0, 0.0)


def test_array_inputs_broadcast():
    m0, m1 = np.meshgrid([1.0, 10.0, 100.0], [21.0, 60.0], indexing="ij")
    obs = observables(None, EXAMPLE, D, mu0=m0, mu1=m1)
    assert obs.qber.shape == (3, 2)
    for (i, j) in product(range(3), range(2)):
        single = observables(AttackParams(m0[i, j], m1[i, j]), EXAMPLE, D)
        assert obs.qber[i, j] == pytest.approx(single.qber, rel=1e-14)


def test_eve_efficiency_scales_brightness():
    a = observables(AttackParams(60.0, 30.0, eve_efficiency=0.5), EXAMPLE, D)
    b = observables(AttackParams(30.0, 15.0), EXAMPLE, D)
    assert a.qber == pytest.approx(b.qber, rel=1e-14)
