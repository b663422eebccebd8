"""Simulation of a calibration-deception attack on a plug-and-play QKD link.

Eve fools the detector-gate calibration into separating the two detectors'
efficiency curves in time, then runs a faked-state intercept-resend attack
whose QBER stays under the abort threshold.
"""

__version__ = "0.1.0"

from .attack import (AttackObservables, AttackParams, AttackTiming, EtaMatrix, FakedState,
                     case_click_probabilities, enumerated_observables, faked_state_for,
                     ideal_fsa_qber, observables)
from .calibration import (EveLlmStrategy, LlmConfig, LlmOutcome, estimate_efficiency_curves,
                          induced_shift, induced_shift_runs, run_llm, visibility_scan)
from .detector import (DetectorPair, DetectorParams, EfficiencyCurve, click_probability,
                       default_hacked_pair, default_intrinsic_pair, efficiency_at, mismatch_ratio)
from .errors import CalibrationFailed, InvalidArgument, SyncNotFound, UndefinedQber
from .montecarlo import SessionConfig, SiftedKeyStats, simulate_session, validate_closed_forms
from .optics import OpticalPulse, PhasePattern, eve_flip_pattern, interfere, make_pulse
from .optimizer import (AbortModel, GridSpec, Optimum, RateTarget, abort_threshold,
                        min_qber_at_rates, scan_grid, sweep_transmission)
from .scenario import Scenario
