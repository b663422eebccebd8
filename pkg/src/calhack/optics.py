"""Time-domain pulse envelopes, phase modulation patterns and two-port interference.

Times are in ns, phases in radians. Port D0 is the constructive port:
a relative phase of 0 sends everything to D0, a relative phase of pi to D1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
DEFAULT_GRID_SPACING = 0.005

# Split-pulse centroid separation 2*sigma*sqrt(2/pi) equals 0.459 ns for this width.
DEFAULT_BRIGHT_SIGMA = 0.2875
DEFAULT_BRIGHT_FWHM = DEFAULT_BRIGHT_SIGMA * FWHM_PER_SIGMA


@dataclass(frozen=True)
class OpticalPulse:
    center_time: float
    width_sigma: float
    mean_photons: float

    def __post_init__(self):
        if not math.isfinite(self.center_time):
            raise InvalidArgument(f"center_time must be finite, got {self.center_time}")
        if not self.width_sigma > 0:
            raise InvalidArgument(f"width_sigma must be > 0, got {self.width_sigma}")
        if not self.mean_photons >= 0:
            raise InvalidArgument(f"mean_photons must be >= 0, got {self.mean_photons}")

    @property
    def fwhm(self) -> float:
        return self.width_sigma * FWHM_PER_SIGMA

    def envelope(self, t) -> np.ndarray:
        """Photon flux density in photons/ns; integrates to ``mean_photons``."""
        t = np.asarray(t, dtype=float)
        z = (t - self.center_time) / self.width_sigma
        norm = self.mean_photons / (self.width_sigma * math.sqrt(2.0 * math.pi))
        return norm * np.exp(-0.5 * z * z)

    def support(self, n_sigma: float = 8.0) -> tuple[float, float]:
        half = n_sigma * self.width_sigma
        return self.center_time - half, self.center_time + half

    def shifted(self, offset: float) -> "OpticalPulse":
        return OpticalPulse(self.center_time + offset, self.width_sigma, self.mean_photons)

    def with_photons(self, mean_photons: float) -> "OpticalPulse":
        return OpticalPulse(self.center_time, self.width_sigma, mean_photons)


def make_pulse(center: float, fwhm: float, mean_photons: float) -> OpticalPulse:
    if not fwhm > 0:
        raise InvalidArgument(f"fwhm must be > 0, got {fwhm}")
    if not mean_photons >= 0:
        raise InvalidArgument(f"mean_photons must be >= 0, got {mean_photons}")
    return OpticalPulse(float(center), fwhm / FWHM_PER_SIGMA, float(mean_photons))


@dataclass(frozen=True)
class PhasePattern:
    """Piecewise-constant phase: each ``(start_time, phase)`` holds until the next start.

    A nonzero ``rise_time`` replaces each step by a linear ramp starting at the
    segment's start time. Before the first start the first phase applies.
    """

    segments: tuple[tuple[float, float], ...]
    rise_time: float = 0.0

    def __post_init__(self):
        segs = tuple((float(s), float(p)) for s, p in self.segments)
        if not segs:
            raise InvalidArgument("a phase pattern needs at least one segment")
        starts = [s for s, _ in segs]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise InvalidArgument("segment start times must be strictly increasing")
        if not all(math.isfinite(p) for _, p in segs):
            raise InvalidArgument("phases must be finite")
        if self.rise_time < 0:
            raise InvalidArgument("rise_time must be >= 0")
        if self.rise_time > 0 and any(b - a < self.rise_time for a, b in zip(starts, starts[1:])):
            raise InvalidArgument("segments shorter than rise_time")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def constant(cls, phase: float) -> "PhasePattern":
        return cls(((-math.inf, phase),))

    def phase_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        flat = np.atleast_1d(t)
        starts = np.array([s for s, _ in self.segments])
        phases = np.array([p for _, p in self.segments])
        idx = np.clip(np.searchsorted(starts, flat, side="right") - 1, 0, None)
        out = phases[idx]
        if self.rise_time > 0:
            for k in range(1, len(phases)):
                ramp = (flat >= starts[k]) & (flat < starts[k] + self.rise_time)
                frac = (flat[ramp] - starts[k]) / self.rise_time
                out[ramp] = phases[k - 1] + frac * (phases[k] - phases[k - 1])
        return out.reshape(t.shape)

    def shifted(self, offset: float) -> "PhasePattern":
        return PhasePattern(tuple((s + offset, p) for s, p in self.segments), self.rise_time)


def eve_flip_pattern(edge_time: float, polarity: int = 1, rise_time: float = 0.0,
                     swing: str = "symmetric") -> PhasePattern:
    """Eve's rising-edge phase flip.

    ``swing="symmetric"`` switches -polarity*pi/2 -> +polarity*pi/2 (used against
    phi_Bob = pi/2); ``"zero_to_pi"`` switches 0 -> polarity*pi (used against phi_Bob = 0).
    """
    if polarity not in (1, -1):
        raise InvalidArgument(f"polarity must be +1 or -1, got {polarity}")
    if swing == "symmetric":
        before, after = -polarity * math.pi / 2, polarity * math.pi / 2
    elif swing == "zero_to_pi":
        before, after = 0.0, polarity * math.pi
    else:
        raise InvalidArgument(f"unknown swing {swing!r}")
    return PhasePattern(((-math.inf, before), (float(edge_time), after)), rise_time)


@dataclass(frozen=True)
class PortIntensity:
    sample_times: np.ndarray
    d0_density: np.ndarray
    d1_density: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.sample_times[1] - self.sample_times[0])

    def energies(self) -> tuple[float, float]:
        dt = self.spacing
        return float(self.d0_density.sum() * dt), float(self.d1_density.sum() * dt)

    def centroids(self) -> tuple[float, float]:
        t = self.sample_times
        return (float((t * self.d0_density).sum() / self.d0_density.sum()),
                float((t * self.d1_density).sum() / self.d1_density.sum()))

    def density(self, port: int) -> np.ndarray:
        return self.d0_density if port == 0 else self.d1_density


def sample_grid(pulse: OpticalPulse, spacing: float = DEFAULT_GRID_SPACING,
                n_sigma: float = 8.0) -> np.ndarray:
    """Uniform grid covering the pulse support; the pulse center is a grid node."""
    if not spacing > 0:
        raise InvalidArgument("grid spacing must be > 0")
    n = int(math.ceil(n_sigma * pulse.width_sigma / spacing))
    return pulse.center_time + spacing * np.arange(-n, n + 1)


def interfere(pulse: OpticalPulse, bob_phase: float, eve_pattern: PhasePattern,
              grid=None, visibility: float = 1.0) -> PortIntensity:
    t = sample_grid(pulse) if grid is None else np.asarray(grid, dtype=float)
    if t.size < 2:
        raise InvalidArgument("interference grid needs at least two samples")
    env = pulse.envelope(t)
    dphi = bob_phase - eve_pattern.phase_at(t)
    to_d0 = 0.5 * (1.0 + visibility * np.cos(dphi))
    d0 = env * to_d0
    return PortIntensity(t, d0, env - d0)
