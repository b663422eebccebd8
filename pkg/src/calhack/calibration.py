"""Line-length calibration of the detector gates, Eve's deception of it, and the
two bench procedures used to set up and verify the hack.

The scan convention: a gate at scan delay ``tau`` sees efficiency
``eta_j(t - tau)`` for light arriving at ``t``. The routine locates each
detector's response peak and moves the gate so that peak sits where it sat for
a reference (symmetric, no-Eve) illumination. Time zero is therefore the gate
center of an honest calibration.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import binom

from .detector import DetectorPair
from .errors import CalibrationFailed, InvalidArgument, SyncNotFound
from .optics import (DEFAULT_BRIGHT_SIGMA, DEFAULT_GRID_SPACING, OpticalPulse, PhasePattern,
                     eve_flip_pattern, interfere, sample_grid)

POLICIES = ("uniform_pi2", "uniform_0", "random_0_pi")
ESTIMATORS = ("centroid", "argmax")
# Puts the D0 peak click probability near 0.9 under the symmetric illumination.
DEFAULT_BRIGHT_PHOTONS = 70.0


@dataclass(frozen=True)
class LlmConfig:
    scan_start: float = -3.0
    scan_stop: float = 3.0
    scan_step: float = 0.05
    bright_pulse: OpticalPulse = field(
        default_factory=lambda: OpticalPulse(0.0, DEFAULT_BRIGHT_SIGMA, DEFAULT_BRIGHT_PHOTONS))
    bob_phase_policy: str = "uniform_pi2"
    peak_estimator: str = "centroid"
    shots_per_point: int = 1000
    jitter_sigma: float = 0.0
    grid_spacing: float = DEFAULT_GRID_SPACING

    def __post_init__(self):
        if not self.scan_step > 0:
            raise InvalidArgument("scan_step must be > 0")
        if self.bob_phase_policy not in POLICIES:
            raise InvalidArgument(f"unknown phase policy {self.bob_phase_policy!r}")
        if self.peak_estimator not in ESTIMATORS:
            raise InvalidArgument(f"unknown peak estimator {self.peak_estimator!r}")
        if self.shots_per_point < 1:
            raise InvalidArgument("shots_per_point must be >= 1")
        if self.jitter_sigma < 0:
            raise InvalidArgument("jitter_sigma must be >= 0")
        lo, hi = self.bright_pulse.support(3.0)
        if self.scan_start > lo or self.scan_stop < hi:
            raise InvalidArgument("scan range must span the bright pulse support (+-3 sigma)")

    def scan_delays(self) -> np.ndarray:
        n = int(round((self.scan_stop - self.scan_start) / self.scan_step))
        return self.scan_start + self.scan_step * np.arange(n + 1)


@dataclass(frozen=True)
class EveLlmStrategy:
    kind: str = "absent"
    edge_time: float = 0.0
    polarity: int = 1
    swing: str = "symmetric"
    rise_time: float = 0.0

    def __post_init__(self):
        if self.kind not in ("absent", "phase_flip"):
            raise InvalidArgument(f"unknown Eve strategy {self.kind!r}")
        if self.polarity not in (1, -1):
            raise InvalidArgument("polarity must be +1 or -1")

    @classmethod
    def absent(cls) -> "EveLlmStrategy":
        return cls()

    @classmethod
    def phase_flip(cls, edge_time: float = 0.0, polarity: int = 1, swing: str = "symmetric",
                   rise_time: float = 0.0) -> "EveLlmStrategy":
        return cls("phase_flip", edge_time, polarity, swing, rise_time)

    def pattern(self) -> PhasePattern:
        if self.kind == "absent":
            return PhasePattern.constant(0.0)
        return eve_flip_pattern(self.edge_time, self.polarity, self.rise_time, self.swing)


@dataclass(frozen=True)
class LlmOutcome:
    gate_delay_d0: float
    gate_delay_d1: float
    scan_delays: np.ndarray
    click_histograms: np.ndarray  # shape (2, n_delays), counts per detector
    shots_per_point: int

    @property
    def delta01(self) -> float:
        return self.gate_delay_d0 - self.gate_delay_d1

    def apply(self, pair: DetectorPair) -> DetectorPair:
        return pair.with_gate_delays(self.gate_delay_d0, self.gate_delay_d1)


def _bob_phases(policy: str) -> tuple[float, ...]:
    return {"uniform_pi2": (math.pi / 2,), "uniform_0": (0.0,),
            "random_0_pi": (0.0, math.pi)}[policy]


def _gate_exposure(density: np.ndarray, times: np.ndarray, pair: DetectorPair, j: int,
                   delays: np.ndarray) -> np.ndarray:
    """Mean detected-photon exponent for each gate delay."""
    dt = times[1] - times[0]
    eta = pair.eta(j, times[None, :] - delays[:, None])
    return (eta * density[None, :]).sum(axis=1) * dt


def _click_probabilities(cfg: LlmConfig, pair: DetectorPair, pattern: PhasePattern,
                         policy: str, offsets=(0.0, 0.0)) -> np.ndarray:
    """Per-phase click probabilities, shape (n_phases, 2, n_delays)."""
    pulse = cfg.bright_pulse
    grid = sample_grid(pulse, cfg.grid_spacing)
    delays = cfg.scan_delays()
    out = []
    for phase in _bob_phases(policy):
        ports = interfere(pulse, phase, pattern, grid)
        per_det = []
        for j in (0, 1):
            dark = pair.params(j).dark_count
            x = _gate_exposure(ports.density(j), grid, pair, j, delays + offsets[j])
            per_det.append(dark - (1.0 - dark) * np.expm1(-x))
        out.append(per_det)
    return np.array(out)


def _dark_floor(dark: float, shots: int, n_bins: int) -> float:
    """Click fraction that dark counts alone exceed with probability 0.0027 over the scan."""
    return float(binom.isf(0.0027 / n_bins, shots, dark)) / shots


def _locate_peak(rates: np.ndarray, delays: np.ndarray, floor: float, estimator: str,
                 detector: int) -> float:
    weight = np.clip(rates - floor, 0.0, None)
    if not np.any(weight > 0):
        raise CalibrationFailed(f"D{detector}: no clicks above the dark floor in the scan range")
    if estimator == "argmax":
        return float(delays[int(np.argmax(rates))])
    return float((weight * delays).sum() / weight.sum())


def reference_peaks(cfg: LlmConfig, pair: DetectorPair) -> tuple[float, float]:
    """Noiseless peak positions of the intrinsic (zero gate delay) response under the
    honest, symmetric (phi_Bob = pi/2) illumination."""
    intrinsic = pair.with_gate_delays(0.0, 0.0)
    probs = _click_probabilities(cfg, intrinsic, PhasePattern.constant(0.0), "uniform_pi2")[0]
    delays = cfg.scan_delays()
    return tuple(
        _locate_peak(probs[j], delays,
                     _dark_floor(pair.params(j).dark_count, cfg.shots_per_point, delays.size),
                     cfg.peak_estimator, j)
        for j in (0, 1))


def run_llm(cfg: LlmConfig, pair: DetectorPair, eve: EveLlmStrategy, seed: int) -> LlmOutcome:
    rng = np.random.default_rng(seed)
    offsets = (0.0, 0.0)
    if cfg.jitter_sigma > 0:
        delta = rng.normal(0.0, cfg.jitter_sigma)
        offsets = (0.5 * delta, -0.5 * delta)
    probs = _click_probabilities(cfg, pair, eve.pattern(), cfg.bob_phase_policy, offsets)
    shots = cfg.shots_per_point
    delays = cfg.scan_delays()
    if probs.shape[0] == 1:
        counts = rng.binomial(shots, probs[0])
    else:
        n_first = rng.binomial(shots, 0.5, size=delays.size)
        counts = rng.binomial(n_first, probs[0]) + rng.binomial(shots - n_first, probs[1])
    ref = reference_peaks(cfg, pair)
    gates = []
    for j in (0, 1):
        floor = _dark_floor(pair.params(j).dark_count, shots, delays.size)
        peak = _locate_peak(counts[j] / shots, delays, floor, cfg.peak_estimator, j)
        gates.append(pair.params(j).gate_delay + peak - ref[j])
    return LlmOutcome(gates[0], gates[1], delays, np.asarray(counts), shots)


def induced_shift(hacked: LlmOutcome, baseline: LlmOutcome) -> float:
    return hacked.delta01 - baseline.delta01


def induced_shift_runs(cfg: LlmConfig, pair: DetectorPair, eve: EveLlmStrategy,
                       seeds) -> np.ndarray:
    """Induced shift per seed; baselines are honest runs of ``cfg`` without jitter."""
    base_cfg = replace(cfg, jitter_sigma=0.0)
    absent = EveLlmStrategy.absent()
    return np.array([induced_shift(run_llm(cfg, pair, eve, s), run_llm(base_cfg, pair, absent, s))
                     for s in seeds])


def visibility_curve(edge_delays, pulse: OpticalPulse, bob_phase: float,
                     swing: str = "symmetric", polarity: int = 1,
                     spacing: float = DEFAULT_GRID_SPACING / 5) -> np.ndarray:
    """|integral envelope * cos(dphi)| / integral envelope for each edge delay."""
    t = sample_grid(pulse, spacing)
    env = pulse.envelope(t)
    total = env.sum()
    out = []
    for edge in np.asarray(edge_delays, dtype=float):
        dphi = bob_phase - eve_flip_pattern(edge, polarity, swing=swing).phase_at(t)
        out.append(abs((env * np.cos(dphi)).sum()) / total)
    return np.array(out)


def visibility_scan(edge_delays, pulse: OpticalPulse, bob_phase: float,
                    swing: str = "symmetric", polarity: int = 1) -> float:
    """Edge delay of minimum interference visibility (Eve's synchronization point)."""
    delays = np.asarray(edge_delays, dtype=float)
    if delays.size == 0:
        raise InvalidArgument("no edge delays to scan")
    vis = visibility_curve(delays, pulse, bob_phase, swing, polarity)
    if np.ptp(vis) < 1e-9:
        raise SyncNotFound("visibility does not change over the scanned delays")
    return float(delays[int(np.argmin(vis))])


@dataclass(frozen=True)
class PeakEstimate:
    position: float
    value: float
    value_uncorrected: float
    sigma_left: float
    sigma_right: float


@dataclass(frozen=True)
class CurveEstimate:
    times: np.ndarray
    values: np.ndarray  # shape (2, n), click model inverted per point
    stderr: np.ndarray
    linear: np.ndarray  # (clicks - dark) / mu, no saturation correction
    probe_sigma: float

    def peak(self, j: int, level: float = 0.2) -> PeakEstimate:
        """Fit a two-sided Gaussian, convolved with the probe shape, near the maximum.

        A plain two-sided fit gives the starting point and the uncorrected peak
        value; the convolved fit then removes both the probe broadening and the
        shift of the apparent maximum towards the wider flank.
        """
        y = self.values[j]
        top = np.nanmax(y)
        mask = y > level * top
        if not top > 0 or mask.sum() < 5:
            raise ValueError(f"D{j}: curve estimate has no resolvable peak")
        t = self.times[mask]
        err = self.stderr[j][mask] + 1e-12
        guess = (top, float(self.times[int(np.nanargmax(y))]), 0.4, 0.4)
        plain, _ = curve_fit(_two_sided, t, y[mask], p0=guess, sigma=err, absolute_sigma=True,
                             maxfev=20000)
        nodes = np.linspace(-5.0, 5.0, 101) * self.probe_sigma
        weights = np.exp(-0.5 * (nodes / self.probe_sigma) ** 2)
        weights /= weights.sum()

        def convolved(tt, peak, center, sl, sr):
            return (_two_sided(tt[:, None] + nodes[None, :], peak, center, sl, sr)
                    * weights[None, :]).sum(axis=1)

        popt, _ = curve_fit(convolved, t, y[mask], p0=plain, sigma=err, absolute_sigma=True,
                            maxfev=20000)
        value, center, sl, sr = popt
        return PeakEstimate(float(center), float(value), float(plain[0]), abs(float(sl)),
                            abs(float(sr)))


def _two_sided(t, peak, center, sl, sr):
    sigma = np.where(t < center, abs(sl), abs(sr))
    return peak * np.exp(-0.5 * ((t - center) / sigma) ** 2)


def estimate_efficiency_curves(pair: DetectorPair, probe: OpticalPulse, step: float = 0.020,
                               shots_per_point: int = 100_000, seed: int = 0,
                               span: tuple[float, float] = (-3.0, 3.0),
                               noiseless: bool = False) -> CurveEstimate:
    """Sweep a weak probe across the gates and reconstruct both efficiency curves.

    The probe arrival is scanned against fixed gates, which is the same relative
    sweep as scanning the gate delay but yields the curves on the arrival-time
    axis. ``noiseless=True`` uses the exact click probabilities (infinite shots).
    """
    if not step > 0:
        raise InvalidArgument("step must be > 0")
    if shots_per_point < 1:
        raise InvalidArgument("shots_per_point must be >= 1")
    mu = probe.mean_photons
    if not 0 < mu <= 1:
        raise InvalidArgument("probe must be at single-photon level (0 < mean_photons <= 1)")
    rng = np.random.default_rng(seed)
    n = int(round((span[1] - span[0]) / step))
    times = span[0] + step * np.arange(n + 1)
    shape = probe.shifted(-probe.center_time)
    u = sample_grid(shape, spacing=min(step, shape.width_sigma) / 10, n_sigma=6)
    weights = shape.envelope(u)
    weights = weights / weights.sum()
    values, errs, linear = [], [], []
    for j in (0, 1):
        dark = pair.params(j).dark_count
        x = mu * (pair.eta(j, times[:, None] + u[None, :]) * weights[None, :]).sum(axis=1)
        p = dark - (1.0 - dark) * np.expm1(-x)
        p_hat = p if noiseless else rng.binomial(shots_per_point, p) / shots_per_point
        q = np.clip(1.0 - p_hat, 1.0 / (2 * shots_per_point), None)
        values.append(0.0 - np.log(q / (1.0 - dark)) / mu)
        errs.append(np.sqrt(np.clip(p_hat * (1 - p_hat), 1e-300, None) / shots_per_point) / (q * mu))
        linear.append((p_hat - dark) / mu)
    return CurveEstimate(times, np.array(values), np.array(errs), np.array(linear),
                         shape.width_sigma)
