"""
Recover the hacked efficiency curves with a weak probe, the way Eve would
check her work on the bench: scan a 200 ps, single-photon-level pulse in 20 ps
steps against the fixed gates and invert the click model point by point.
"""
import numpy as np

from calhack.calibration import estimate_efficiency_curves
from calhack.scenario import Scenario

sc = Scenario.default()
pair = sc.hacked_pair()
p = sc.data["probe"]
est = estimate_efficiency_curves(pair, sc.probe(), step=p["step"],
                                 shots_per_point=p["shots_per_point"],
                                 seed=sc.data["seeds"]["estimate_curves"], span=tuple(p["span"]))

for j in (0, 1):
    pk = est.peak(j)
    true_pos = pair.curve(j).center + pair.params(j).gate_delay
    print(f"D{j}: peak at {pk.position * 1e3:+7.1f} ps (true {true_pos * 1e3:+7.1f}), "
          f"value {pk.value:.4f} (true {pair.curve(j).peak:.4f}, "
          f"plain fit {pk.value_uncorrected:.4f})")

# The raw linear estimate (clicks - dark) / mu saturates slightly at the peak.
i0 = int(np.nanargmax(est.values[0]))
print(f"D0 at its peak: inverted {est.values[0][i0]:.5f}, linear {est.linear[0][i0]:.5f}")

# Mismatch where the faked states arrive
for name, t in (("t0", sc.timing().t0), ("t1", sc.timing().t1)):
    k = int(np.argmin(np.abs(est.times - t)))
    e0, e1 = est.values[0][k], est.values[1][k]
    print(f"{name} = {t:+.2f} ns: eta0 ~ {e0:.2e}, eta1 ~ {e1:.2e}")
