import math
from dataclasses import replace

import numpy as np
import pytest

from calhack.calibration import (EveLlmStrategy, LlmConfig, estimate_efficiency_curves,
                                 induced_shift, induced_shift_runs, reference_peaks, run_llm,
                                 visibility_curve, visibility_scan)
from calhack.detector import (DetectorPair, DetectorParams, EfficiencyCurve, default_intrinsic_pair)
from calhack.errors import CalibrationFailed, InvalidArgument, SyncNotFound
from calhack.optics import DEFAULT_BRIGHT_SIGMA, OpticalPulse, make_pulse

SPLIT = 2 * DEFAULT_BRIGHT_SIGMA * math.sqrt(2 / math.pi)
PAIR = default_intrinsic_pair()
CFG = LlmConfig()
FLIP = EveLlmStrategy.phase_flip()


def test_same_seed_same_outcome():
    a = run_llm(CFG, PAIR, FLIP, seed=4)
    b = run_llm(CFG, PAIR, FLIP, seed=4)
    assert a.gate_delay_d0 == b.gate_delay_d0 and a.gate_delay_d1 == b.gate_delay_d1
    np.testing.assert_array_equal(a.click_histograms, b.click_histograms)


@pytest.mark.parametrize("policy", ["uniform_pi2", "random_0_pi"])
def test_honest_calibration_is_centered(policy):
    cfg = replace(CFG, bob_phase_policy=policy)
    out = run_llm(cfg, PAIR, EveLlmStrategy.absent(), seed=2)
    assert abs(out.delta01) <= cfg.scan_step
    assert abs(out.gate_delay_d0) <= cfg.scan_step and abs(out.gate_delay_d1) <= cfg.scan_step


def test_hacked_calibration_separates_gates():
    shifts = induced_shift_runs(CFG, PAIR, FLIP, seeds=range(5))
    assert np.all(np.abs(shifts - 0.459) <= 0.05)
    assert SPLIT == pytest.approx(0.459, abs=1e-3)


def test_noiseless_shift_matches_split_centroids():
    cfg = replace(CFG, shots_per_point=10**9, scan_step=0.01)
    out = run_llm(cfg, PAIR, FLIP, seed=0)
    base = run_llm(cfg, PAIR, EveLlmStrategy.absent(), seed=0)
    # the efficiency curves are asymmetric, so centroids of clicks need not equal
    # the photon centroids; the separation still tracks the split closely
    assert induced_shift(out, base) == pytest.approx(SPLIT, abs=0.02)


def test_polarity_reverses_shift():
    plus = induced_shift_runs(CFG, PAIR, FLIP, seeds=[3])[0]
    minus = induced_shift_runs(CFG, PAIR, EveLlmStrategy.phase_flip(polarity=-1), seeds=[3])[0]
    assert minus == pytest.approx(-plus, abs=0.05)
    assert minus < -0.4


def test_countermeasure_cancels_shift():
    cfg = replace(CFG, bob_phase_policy="random_0_pi")
    shifts = induced_shift_runs(cfg, PAIR, FLIP, seeds=range(5))
    assert np.all(np.abs(shifts) <= 0.05)


def test_zero_phase_variant_with_full_swing():
    cfg = replace(CFG, bob_phase_policy="uniform_0")
    eve = EveLlmStrategy.phase_flip(swing="zero_to_pi")
    hacked = run_llm(cfg, PAIR, eve, seed=1)
    base = run_llm(CFG, PAIR, EveLlmStrategy.absent(), seed=1)
    assert abs(abs(induced_shift(hacked, base)) - 0.459) <= 0.05


def test_uniform_zero_without_eve_starves_d1():
    cfg = replace(CFG, bob_phase_policy="uniform_0")
    with pytest.raises(CalibrationFailed, match="D1"):
        run_llm(cfg, PAIR, EveLlmStrategy.absent(), seed=0)


def test_dark_pulse_fails_calibration():
    cfg = replace(CFG, bright_pulse=CFG.bright_pulse.with_photons(0.0))
    with pytest.raises(CalibrationFailed):
        run_llm(cfg, PAIR, EveLlmStrategy.absent(), seed=0)


def test_argmax_estimator_also_separates():
    cfg = replace(CFG, peak_estimator="argmax")
    shift = induced_shift_runs(cfg, PAIR, FLIP, seeds=[0])[0]
    assert shift > 0.3


def test_misaligned_gates_are_realigned():
    moved = PAIR.with_gate_delays(0.2, -0.1)
    out = run_llm(CFG, moved, EveLlmStrategy.absent(), seed=5)
    # the routine sets absolute delays, so misaligned gates come back to zero
    assert out.gate_delay_d0 == pytest.approx(0.0, abs=CFG.scan_step)
    assert out.gate_delay_d1 == pytest.approx(0.0, abs=CFG.scan_step)


def test_reference_peaks_are_deterministic():
    assert reference_peaks(CFG, PAIR) == reference_peaks(CFG, PAIR)


def test_jitter_ensemble_is_unbiased():
    cfg = replace(CFG, jitter_sigma=0.05)
    shifts = induced_shift_runs(cfg, PAIR, FLIP, seeds=range(30))
    se = shifts.std(ddof=1) / math.sqrt(shifts.size)
    assert abs(shifts.mean() - SPLIT) <= 3 * se + 0.01
    assert shifts.std() > 0.02


@pytest.mark.parametrize("bad", [dict(scan_step=0.0), dict(bob_phase_policy="pi"),
                                 dict(peak_estimator="mode"), dict(shots_per_point=0),
                                 dict(jitter_sigma=-1.0), dict(scan_start=-0.5)])
def test_config_validation(bad):
    with pytest.raises(InvalidArgument):
        LlmConfig(**bad)


def test_visibility_minimum_at_pulse_center():
    pulse = OpticalPulse(0.3, DEFAULT_BRIGHT_SIGMA, 70.0)
    delays = np.arange(-0.7, 1.3001, 0.005)
    edge = visibility_scan(delays, pulse, math.pi / 2)
    assert edge == pytest.approx(0.3, abs=0.005)
    vis = visibility_curve(delays, pulse, math.pi / 2)
    # residual is the single grid sample that lands on the edge
    assert vis.min() < 5e-3 and vis.max() > 0.9


def test_visibility_scan_far_from_pulse_fails():
    pulse = OpticalPulse(0.0, DEFAULT_BRIGHT_SIGMA, 70.0)
    with pytest.raises(SyncNotFound):
        visibility_scan(np.linspace(20, 21, 11), pulse, math.pi / 2)
    with pytest.raises(InvalidArgument):
        visibility_scan([], pulse, math.pi / 2)


def test_zero_width_probe_recovers_curves_exactly():
    probe = OpticalPulse(0.0, 1e-6, 0.5)
    est = estimate_efficiency_curves(PAIR, probe, noiseless=True)
    for j in (0, 1):
        truth = PAIR.eta(j, est.times)
        np.testing.assert_allclose(est.values[j], truth, rtol=1e-6, atol=1e-12)


def test_convolved_fit_is_exact_without_noise():
    hacked = PAIR.with_gate_delays(0.2295, -0.2295)
    est = estimate_efficiency_curves(hacked, make_pulse(0.0, 0.2, 1.0), noiseless=True)
    for j, truth in enumerate((hacked.d0_curve, hacked.d1_curve)):
        pk = est.peak(j)
        shift = hacked.params(j).gate_delay
        assert pk.position == pytest.approx(truth.center + shift, abs=1e-5)
        assert pk.value == pytest.approx(truth.peak, rel=1e-5)
        assert (pk.sigma_left, pk.sigma_right) == pytest.approx(
            (truth.sigma_left, truth.sigma_right), rel=1e-4)
        # the plain fit is biased low by probe broadening
        assert pk.value_uncorrected < 0.99 * truth.peak


def test_curve_estimate_peak_accuracy():
    probe = make_pulse(0.0, 0.2, 1.0)
    hacked = PAIR.with_gate_delays(0.2295, -0.2295)
    est = estimate_efficiency_curves(hacked, probe, shots_per_point=100_000, seed=11)
    for j, (pos, value) in enumerate(((0.2295, 0.076), (-0.2295, 0.064))):
        pk = est.peak(j)
        assert abs(pk.position - pos) <= 0.020
        assert pk.value == pytest.approx(value, rel=0.05)


def test_dark_only_detector_reads_as_zero():
    blind = EfficiencyCurve(0.0, 0.0, 0.3, 0.3)
    pair = DetectorPair(blind, PAIR.d1_curve, DetectorParams(), DetectorParams())
    est = estimate_efficiency_curves(pair, make_pulse(0.0, 0.2, 1.0), shots_per_point=100_000,
                                     seed=1)
    z = est.values[0] / est.stderr[0]
    assert abs(z.mean()) < 3 / math.sqrt(z.size)
    assert np.all(np.abs(z) < 5)


def test_probe_must_be_weak():
    with pytest.raises(InvalidArgument):
        estimate_efficiency_curves(PAIR, make_pulse(0.0, 0.2, 5.0))
