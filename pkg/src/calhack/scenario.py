"""Declarative experiment description: one YAML file fully determines a run.

Every key has a default; a scenario file only lists what it changes. Unknown
keys are rejected so typos do not silently fall back to defaults.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import yaml

from .attack import AttackParams, AttackTiming, EtaMatrix
from .calibration import EveLlmStrategy, LlmConfig
from .detector import DetectorPair
from .errors import InvalidArgument
from .optics import DEFAULT_BRIGHT_FWHM, make_pulse
from .optimizer import AbortModel, GridSpec


class ScenarioError(ValueError):
    """The scenario text cannot be parsed or has unknown/mistyped keys."""


DEFAULTS: dict = {
    "detectors": {
        "d0": {"curve": {"family": "two_sided_gaussian", "peak": 0.076, "center": 0.0,
                         "sigma_left": 0.35, "sigma_right": 0.70},
               "dark_count": 2.4e-4, "gate_delay": 0.0},
        "d1": {"curve": {"family": "two_sided_gaussian", "peak": 0.064, "center": 0.0,
                         "sigma_left": 0.43, "sigma_right": 0.50},
               "dark_count": 2.4e-4, "gate_delay": 0.0},
    },
    "llm": {
        "scan_start": -3.0, "scan_stop": 3.0, "scan_step": 0.05,
        "pulse": {"center": 0.0, "fwhm": round(DEFAULT_BRIGHT_FWHM, 6), "mean_photons": 70.0},
        "bob_phase_policy": "uniform_pi2", "peak_estimator": "centroid",
        "shots_per_point": 1000, "jitter_sigma": 0.0, "grid_spacing": 0.005,
    },
    "eve": {"edge_time": 0.0, "polarity": 1, "swing": "symmetric", "rise_time": 0.0,
            "sync": True, "sync_start": -1.0, "sync_stop": 1.0, "sync_step": 0.005},
    "probe": {"fwhm": 0.2, "mean_photons": 1.0, "step": 0.02, "shots_per_point": 100000,
              "span": [-3.0, 3.0]},
    "attack": {"t0": 1.90, "t1": -1.32, "induced_shift": 0.459, "eve_efficiency": 1.0,
               "mu0": 65.0, "mu1": 21.0},
    "grid": {"mu0_range": [1.0, 100.0], "mu1_range": [21.0, 120.0], "steps": 200,
             "spacing": "log"},
    "rates": {"baseline_p0": 0.038, "baseline_p1": 0.032, "tolerance": 0.05},
    "sweep": {"t_min": 0.25, "t_max": 0.79, "t_steps": 12, "refine": False},
    "abort": {"anchors": [[1.0, 0.0594], [6.0, 0.0826]]},
    "session": {"n_pulses": 1000000, "alice_mu": 2.08, "transmission": 1.0,
                "bob_loss_db": 3.0, "visibility": 1.0},
    "validate": {"points": [[2.0, 25.0], [10.0, 40.0], [30.0, 60.0], [65.0, 21.0],
                            [95.0, 115.0]],
                 "pulses": 1000000},
    "seeds": {"calibrate": 7, "estimate_curves": 11, "simulate": 3, "validate": 5},
}

# Subtrees whose contents are replaced wholesale instead of merged key by key.
_OPAQUE = {("detectors", "d0", "curve"), ("detectors", "d1", "curve")}


def _merge(base: dict, update: dict, path=()) -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        where = ".".join(path + (str(key),))
        if key not in base:
            raise ScenarioError(f"unknown scenario key {where!r}")
        if isinstance(base[key], dict) and path + (key,) not in _OPAQUE:
            if not isinstance(value, dict):
                raise ScenarioError(f"scenario key {where!r} must be a mapping")
            out[key] = _merge(base[key], value, path + (key,))
        else:
            if isinstance(base[key], dict) and not isinstance(value, dict):
                raise ScenarioError(f"scenario key {where!r} must be a mapping")
            out[key] = value
    return out


def _set_path(tree: dict, dotted: str, value) -> dict:
    update: dict = {}
    node = update
    keys = dotted.split(".")
    for k in keys[:-1]:
        node[k] = {}
        node = node[k]
    node[keys[-1]] = value
    return _merge(tree, update)


@dataclass(frozen=True)
class Scenario:
    data: dict

    @classmethod
    def default(cls) -> "Scenario":
        return cls(copy.deepcopy(DEFAULTS)).validated()

    @classmethod
    def from_text(cls, text: str) -> "Scenario":
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ScenarioError(f"cannot parse scenario: {exc}") from exc
        if not isinstance(user, dict):
            raise ScenarioError("scenario must be a mapping at top level")
        return cls(_merge(DEFAULTS, user)).validated()

    @classmethod
    def load(cls, path) -> "Scenario":
        return cls.from_text(Path(path).read_text())

    def with_overrides(self, overrides) -> "Scenario":
        data = self.data
        for item in overrides or ():
            if "=" not in item:
                raise ScenarioError(f"override {item!r} is not of the form key.path=value")
            key, raw = item.split("=", 1)
            try:
                value = yaml.safe_load(raw)
            except yaml.YAMLError as exc:
                raise ScenarioError(f"cannot parse override value {raw!r}") from exc
            data = _set_path(data, key.strip(), value)
        return Scenario(data).validated()

    def validated(self) -> "Scenario":
        """Build every component once so invariant violations surface at load time."""
        try:
            self.intrinsic_pair()
            self.llm_config()
            self.eve()
            self.sync_delays()
            self.probe()
            self.attack_params()
            self.grid()
            self.abort_model()
            self.t_values()
        except (KeyError, TypeError) as exc:
            raise ScenarioError(f"malformed scenario value: {exc}") from exc
        return self

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True)

    def canonical_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # component builders

    def intrinsic_pair(self) -> DetectorPair:
        return DetectorPair.from_dict(self.data["detectors"])

    def hacked_pair(self) -> DetectorPair:
        """Intrinsic pair with gates moved apart by the configured induced shift."""
        pair = self.intrinsic_pair()
        half = 0.5 * float(self.data["attack"]["induced_shift"])
        return pair.with_gate_delays(pair.d0_params.gate_delay + half,
                                     pair.d1_params.gate_delay - half)

    def llm_config(self) -> LlmConfig:
        c = self.data["llm"]
        p = c["pulse"]
        return LlmConfig(float(c["scan_start"]), float(c["scan_stop"]), float(c["scan_step"]),
                         make_pulse(float(p["center"]), float(p["fwhm"]), float(p["mean_photons"])),
                         c["bob_phase_policy"], c["peak_estimator"], int(c["shots_per_point"]),
                         float(c["jitter_sigma"]), float(c["grid_spacing"]))

    def eve(self) -> EveLlmStrategy:
        e = self.data["eve"]
        return EveLlmStrategy.phase_flip(float(e["edge_time"]), int(e["polarity"]), e["swing"],
                                         float(e["rise_time"]))

    def sync_delays(self):
        e = self.data["eve"]
        lo, hi, step = float(e["sync_start"]), float(e["sync_stop"]), float(e["sync_step"])
        if not (step > 0 and lo < hi):
            raise InvalidArgument("eve sync scan needs sync_start < sync_stop and sync_step > 0")
        n = int(round((hi - lo) / step))
        return [lo + step * k for k in range(n + 1)]

    def probe(self):
        p = self.data["probe"]
        span = tuple(float(x) for x in p["span"])
        if len(span) != 2 or not span[0] < span[1]:
            raise InvalidArgument("probe.span must be [start, stop] with start < stop")
        return make_pulse(0.0, float(p["fwhm"]), float(p["mean_photons"]))

    def timing(self) -> AttackTiming:
        a = self.data["attack"]
        return AttackTiming(float(a["t0"]), float(a["t1"]))

    def attack_params(self) -> AttackParams:
        a = self.data["attack"]
        return AttackParams(float(a["mu0"]), float(a["mu1"]), self.timing(),
                            float(a["eve_efficiency"]))

    def etas(self) -> EtaMatrix:
        return EtaMatrix.from_pair(self.hacked_pair(), self.timing())

    def grid(self) -> GridSpec:
        g = self.data["grid"]
        return GridSpec(tuple(float(x) for x in g["mu0_range"]),
                        tuple(float(x) for x in g["mu1_range"]), int(g["steps"]), g["spacing"])

    def abort_model(self) -> AbortModel:
        return AbortModel(tuple(tuple(a) for a in self.data["abort"]["anchors"]))

    def t_values(self) -> list[float]:
        s = self.data["sweep"]
        lo, hi, n = float(s["t_min"]), float(s["t_max"]), int(s["t_steps"])
        if not (0 < lo <= hi <= 1) or n < 1:
            raise InvalidArgument("sweep needs 0 < t_min <= t_max <= 1 and t_steps >= 1")
        if n == 1:
            return [hi]
        step = (hi - lo) / (n - 1)
        values = [hi - k * step for k in range(n)]
        return [float(f"{v:.12g}") for v in values]

