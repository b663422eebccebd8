"""
Walk through the calibration hack on the default detector pair.

1. Eve synchronizes her phase edge to the bright calibration pulse by
   looking for the minimum of interference visibility.
2. With the edge at the pulse center, the early half of every pulse exits
   towards D1 and the late half towards D0.
3. The line-length calibration then places D0's gate later than D1's.
4. Bob's random 0/pi phase removes the effect.
"""
import math
from dataclasses import replace

import numpy as np

from calhack.calibration import (EveLlmStrategy, induced_shift_runs, run_llm, visibility_curve,
                                 visibility_scan)
from calhack.optics import eve_flip_pattern, interfere
from calhack.scenario import Scenario


if __name__ == "__main__":
    sc = Scenario.default()
    cfg = sc.llm_config()
    pair = sc.intrinsic_pair()
    pulse = cfg.bright_pulse
    print(f"bright pulse: sigma = {pulse.width_sigma * 1e3:.1f} ps, "
          f"{pulse.mean_photons:.0f} photons")

    # step 1: sync scan
    delays = sc.sync_delays()
    vis = visibility_curve(delays, pulse, math.pi / 2)
    edge = visibility_scan(delays, pulse, math.pi / 2)
    print(f"visibility ranges {vis.min():.4f} .. {vis.max():.4f}; minimum at edge = {edge:+.3f} ns")

    # step 2: where the light goes
    ports = interfere(pulse, math.pi / 2, eve_flip_pattern(edge))
    c0, c1 = ports.centroids()
    expected = pulse.width_sigma * math.sqrt(2 / math.pi)
    print(f"port centroids: D0 {c0 * 1e3:+.1f} ps, D1 {c1 * 1e3:+.1f} ps "
          f"(half-Gaussian centroid +-{expected * 1e3:.1f} ps)")

    # step 3: calibration with and without Eve
    seed = sc.data["seeds"]["calibrate"]
    honest = run_llm(cfg, pair, EveLlmStrategy.absent(), seed)
    hacked = run_llm(cfg, pair, EveLlmStrategy.phase_flip(edge), seed)
    print(f"honest gates: D0 {honest.gate_delay_d0:+.4f} ns  D1 {honest.gate_delay_d1:+.4f} ns")
    print(f"hacked gates: D0 {hacked.gate_delay_d0:+.4f} ns  D1 {hacked.gate_delay_d1:+.4f} ns")
    print(f"induced shift: {(hacked.delta01 - honest.delta01) * 1e3:.1f} ps")

    flipped = induced_shift_runs(cfg, pair, EveLlmStrategy.phase_flip(edge, polarity=-1), [seed])
    print(f"opposite polarity: {flipped[0] * 1e3:+.1f} ps")

    # step 4: countermeasure
    guarded = replace(cfg, bob_phase_policy="random_0_pi")
    shifts = induced_shift_runs(guarded, pair, EveLlmStrategy.phase_flip(edge), range(20))
    print(f"random 0/pi phase, 20 seeds: |shift| <= {np.max(np.abs(shifts)) * 1e3:.1f} ps")
