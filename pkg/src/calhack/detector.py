"""Gated detector model: efficiency curves, dark counts and the mismatch measure."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidArgument

DEFAULT_DARK = 2.4e-4
DEFAULT_SHIFT = 0.459  # ns, separation induced by the hacked calibration
ATTACK_T0 = 1.90
ATTACK_T1 = -1.32


@dataclass(frozen=True)
class EfficiencyCurve:
    """Two-sided Gaussian efficiency versus arrival time (relative to the gate)."""

    peak: float
    center: float
    sigma_left: float
    sigma_right: float

    def __post_init__(self):
        if not 0.0 <= self.peak <= 1.0:
            raise InvalidArgument(f"peak efficiency must lie in [0, 1], got {self.peak}")
        if not (self.sigma_left > 0 and self.sigma_right > 0):
            raise InvalidArgument("curve sigmas must be > 0")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        sigma = np.where(t < self.center, self.sigma_left, self.sigma_right)
        return self.peak * np.exp(-0.5 * ((t - self.center) / sigma) ** 2)

    def recentered(self, center: float) -> "EfficiencyCurve":
        return replace(self, center=center)

    def to_dict(self) -> dict:
        return {"family": "two_sided_gaussian", "peak": self.peak, "center": self.center,
                "sigma_left": self.sigma_left, "sigma_right": self.sigma_right}


@dataclass(frozen=True)
class SampledCurve:
    """Efficiency tabulated on a uniform time grid, linearly interpolated, zero outside."""

    start: float
    step: float
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.step > 0:
            raise InvalidArgument("sampled curve step must be > 0")
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2 or any(not 0.0 <= v <= 1.0 for v in vals):
            raise InvalidArgument("sampled curve needs >= 2 values in [0, 1]")
        object.__setattr__(self, "values", vals)

    @property
    def times(self) -> np.ndarray:
        return self.start + self.step * np.arange(len(self.values))

    @property
    def peak(self) -> float:
        return max(self.values)

    def __call__(self, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.times, self.values, left=0.0, right=0.0)

    def to_dict(self) -> dict:
        return {"family": "sampled", "start": self.start, "step": self.step,
                "values": list(self.values)}


def curve_from_dict(data: dict):
    family = data.get("family", "two_sided_gaussian")
    if family == "two_sided_gaussian":
        return EfficiencyCurve(float(data["peak"]), float(data["center"]),
                               float(data["sigma_left"]), float(data["sigma_right"]))
    if family == "sampled":
        return SampledCurve(float(data["start"]), float(data["step"]), tuple(data["values"]))
    raise InvalidArgument(f"unknown curve family {family!r}")


@dataclass(frozen=True)
class DetectorParams:
    dark_count: float = DEFAULT_DARK
    gate_delay: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.dark_count < 1.0:
            raise InvalidArgument(f"dark_count must lie in [0, 1), got {self.dark_count}")


@dataclass(frozen=True)
class DetectorPair:
    d0_curve: EfficiencyCurve | SampledCurve
    d1_curve: EfficiencyCurve | SampledCurve
    d0_params: DetectorParams = DetectorParams()
    d1_params: DetectorParams = DetectorParams()

    def curve(self, j: int):
        return self.d0_curve if j == 0 else self.d1_curve

    def params(self, j: int) -> DetectorParams:
        return self.d0_params if j == 0 else self.d1_params

    def eta(self, j: int, t) -> np.ndarray:
        """Efficiency of detector ``j`` for light arriving at time ``t``."""
        return efficiency_at(self.curve(j), t, self.params(j).gate_delay)

    @property
    def mean_dark(self) -> float:
        return 0.5 * (self.d0_params.dark_count + self.d1_params.dark_count)

    def with_gate_delays(self, delay0: float, delay1: float) -> "DetectorPair":
        return replace(self, d0_params=replace(self.d0_params, gate_delay=delay0),
                       d1_params=replace(self.d1_params, gate_delay=delay1))

    def to_dict(self) -> dict:
        return {
            "d0": {"curve": self.d0_curve.to_dict(), "dark_count": self.d0_params.dark_count,
                   "gate_delay": self.d0_params.gate_delay},
            "d1": {"curve": self.d1_curve.to_dict(), "dark_count": self.d1_params.dark_count,
                   "gate_delay": self.d1_params.gate_delay},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorPair":
        def side(key):
            item = data[key]
            return (curve_from_dict(item["curve"]),
                    DetectorParams(float(item.get("dark_count", DEFAULT_DARK)),
                                   float(item.get("gate_delay", 0.0))))
        c0, p0 = side("d0")
        c1, p1 = side("d1")
        return cls(c0, c1, p0, p1)


def efficiency_at(curve, t, gate_delay: float = 0.0) -> np.ndarray:
    return curve(np.asarray(t, dtype=float) - gate_delay)


def click_probability(mu_eff, eta, dark):
    """dark + (1 - dark) * (1 - exp(-mu_eff * eta)); broadcasts over arrays."""
    mu_eff, eta, dark = (np.asarray(x, dtype=float) for x in (mu_eff, eta, dark))
    if np.any(mu_eff < 0) or np.any(eta < 0) or np.any(dark < 0):
        raise InvalidArgument("click_probability inputs must be non-negative")
    if np.any(eta > 1) or np.any(dark >= 1):
        raise InvalidArgument("eta must be <= 1 and dark < 1")
    out = dark - (1.0 - dark) * np.expm1(-mu_eff * eta)
    return out if out.ndim else float(out)


def mismatch_ratio(pair: DetectorPair, t: float) -> float:
    """log10(eta0/eta1) at ``t``; +-inf when one detector is blind, nan when both are."""
    e0 = float(pair.eta(0, t))
    e1 = float(pair.eta(1, t))
    if e0 == 0.0 and e1 == 0.0:
        return math.nan
    if e1 == 0.0:
        return math.inf
    if e0 == 0.0:
        return -math.inf
    return math.log10(e0 / e1)


def default_intrinsic_pair(dark: float = DEFAULT_DARK) -> DetectorPair:
    """Default gate responses centered on their own gates (no-Eve calibrated state)."""
    return DetectorPair(
        EfficiencyCurve(0.076, 0.0, 0.35, 0.70),
        EfficiencyCurve(0.064, 0.0, 0.43, 0.50),
        DetectorParams(dark), DetectorParams(dark),
    )


def default_hacked_pair(shift: float = DEFAULT_SHIFT, dark: float = DEFAULT_DARK) -> DetectorPair:
    """Default pair after Eve's hack: D0 centered at +shift/2, D1 at -shift/2."""
    base = default_intrinsic_pair(dark)
    return DetectorPair(base.d0_curve.recentered(shift / 2), base.d1_curve.recentered(-shift / 2),
                        base.d0_params, base.d1_params)


def check_defaults(pair: DetectorPair | None = None, t0: float = ATTACK_T0,
                   t1: float = ATTACK_T1, min_ratio: float = 20.0) -> list[str]:
    """Return the violated default constraints (empty when all hold)."""
    pair = default_hacked_pair() if pair is None else pair
    problems = []
    r0 = float(pair.eta(0, t0) / pair.eta(1, t0))
    r1 = float(pair.eta(1, t1) / pair.eta(0, t1))
    if min(r0, r1) < min_ratio:
        problems.append(f"mismatch ratio {min(r0, r1):.3g} < {min_ratio} at an attack time")
    for j, target in ((0, 0.038), (1, 0.032)):
        half_peak = 0.5 * pair.curve(j).peak
        if abs(half_peak - target) > 0.05 * target:
            problems.append(f"D{j} half-peak {half_peak:.4f} far from back-to-back rate {target}")
    return problems
