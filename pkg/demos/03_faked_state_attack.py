"""
The faked-state attack at one operating point, checked two independent ways:
the closed-form observables and a brute-force sum over Alice's states and
Eve's measurement outcomes.
"""
from calhack.attack import enumerated_observables, ideal_fsa_qber, observables
from calhack.detector import mismatch_ratio
from calhack.optimizer import scan_grid
from calhack.scenario import Scenario

sc = Scenario.default()
pair = sc.hacked_pair()
etas = sc.etas()
d = pair.mean_dark
timing = sc.timing()

print("efficiencies at the attack times:")
print(f"  eta00 = {etas.eta00:.3e}  eta10 = {etas.eta10:.3e}   "
      f"(log10 mismatch {mismatch_ratio(pair, timing.t0):+.2f})")
print(f"  eta01 = {etas.eta01:.3e}  eta11 = {etas.eta11:.3e}   "
      f"(log10 mismatch {mismatch_ratio(pair, timing.t1):+.2f})")

params = sc.attack_params()
closed = observables(params, etas, d)
brute = enumerated_observables(params, etas, d, d)
print(f"\nmu0 = {params.mu0:g}, mu1 = {params.mu1:g}")
for name in ("p0", "p1", "p_double", "p_error", "p_arrive", "qber"):
    print(f"  {name:9s} closed {getattr(closed, name):.6e}   "
          f"enumerated {getattr(brute, name):.6e}")

print(f"\nideal limit (dim faked states, no dark counts): {ideal_fsa_qber(etas):.4%}")

grid = scan_grid(sc.grid(), etas, d)
print(f"grid of {len(grid)} points: QBER spans {grid.qber.min():.4f} .. {grid.qber.max():.4f}")
