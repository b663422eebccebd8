"""Rate-matched minimisation of the attack QBER over faked-state brightness."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attack import EtaMatrix, observables
from .errors import InvalidArgument

BASELINE_P0 = 0.038
BASELINE_P1 = 0.032
DEFAULT_ABORT_ANCHORS = ((1.0, 0.0594), (6.0, 0.0826))
QBER_CEILING = 0.07


@dataclass(frozen=True)
class GridSpec:
    mu0_range: tuple[float, float] = (1.0, 100.0)
    mu1_range: tuple[float, float] = (21.0, 120.0)
    steps: int = 200
    spacing: str = "log"

    def __post_init__(self):
        for lo, hi in (self.mu0_range, self.mu1_range):
            if not 0 < lo < hi:
                raise InvalidArgument(f"grid range ({lo}, {hi}) must be positive and nonempty")
        if self.steps < 2:
            raise InvalidArgument("grid needs at least 2 steps per axis")
        if self.spacing not in ("log", "linear"):
            raise InvalidArgument(f"unknown grid spacing {self.spacing!r}")

    def axis(self, k: int) -> np.ndarray:
        lo, hi = self.mu0_range if k == 0 else self.mu1_range
        space = np.geomspace if self.spacing == "log" else np.linspace
        return space(lo, hi, self.steps)


@dataclass(frozen=True)
class GridTuples:
    """Flattened grid results, mu0-major order."""

    mu0: np.ndarray
    mu1: np.ndarray
    p0: np.ndarray
    p1: np.ndarray
    qber: np.ndarray

    def __len__(self):
        return self.mu0.size

    def rows(self):
        return zip(self.mu0.tolist(), self.mu1.tolist(), self.p0.tolist(), self.p1.tolist(),
                   self.qber.tolist())


@dataclass(frozen=True)
class RateTarget:
    transmission: float
    baseline_p0: float = BASELINE_P0
    baseline_p1: float = BASELINE_P1
    tolerance: float = 0.05
    mode: str = "per_detector"  # or "overall": constrain p0 + p1 only

    def __post_init__(self):
        if not 0 <= self.transmission <= 1:
            raise InvalidArgument("transmission must lie in [0, 1]")
        if not self.tolerance > 0:
            raise InvalidArgument("tolerance must be > 0")
        if self.mode not in ("per_detector", "overall"):
            raise InvalidArgument(f"unknown rate mode {self.mode!r}")

    @property
    def targets(self) -> tuple[float, float]:
        return self.transmission * self.baseline_p0, self.transmission * self.baseline_p1

    def satisfied(self, p0, p1) -> np.ndarray:
        t0, t1 = self.targets
        tol = self.tolerance
        if self.mode == "overall":
            return np.abs(p0 + p1 - (t0 + t1)) <= tol * (t0 + t1)
        return (np.abs(p0 - t0) <= tol * t0) & (np.abs(p1 - t1) <= tol * t1)


@dataclass(frozen=True)
class AbortModel:
    anchors: tuple[tuple[float, float], ...] = DEFAULT_ABORT_ANCHORS

    def __post_init__(self):
        pts = tuple((float(a), float(b)) for a, b in self.anchors)
        if len(pts) < 2:
            raise InvalidArgument("abort model needs at least two anchors")
        if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
            raise InvalidArgument("abort anchor losses must be increasing")
        if any(not 0 < thr < 1 for _, thr in pts):
            raise InvalidArgument("abort thresholds must lie in (0, 1)")
        object.__setattr__(self, "anchors", pts)

    def threshold(self, loss_db: float) -> tuple[float, bool]:
        """Interpolated threshold and whether ``loss_db`` fell outside the anchors."""
        xs = [a for a, _ in self.anchors]
        ys = [b for _, b in self.anchors]
        clamped = loss_db < xs[0] or loss_db > xs[-1]
        return float(np.interp(loss_db, xs, ys)), clamped


def abort_threshold(loss_db: float, model: AbortModel | None = None) -> float:
    return (model or AbortModel()).threshold(loss_db)[0]


def loss_db_for(transmission: float) -> float:
    return -10.0 * math.log10(transmission)


@dataclass(frozen=True)
class Optimum:
    mu0: float
    mu1: float
    p0: float
    p1: float
    qber: float
    feasible: bool


INFEASIBLE = Optimum(math.nan, math.nan, math.nan, math.nan, math.nan, False)


def scan_grid(grid: GridSpec, etas: EtaMatrix, d: float) -> GridTuples:
    m0, m1 = np.meshgrid(grid.axis(0), grid.axis(1), indexing="ij")
    obs = observables(None, etas, d, mu0=m0, mu1=m1)
    return GridTuples(m0.ravel(), m1.ravel(), obs.p0.ravel(), obs.p1.ravel(), obs.qber.ravel())


def min_qber_at_rates(tuples: GridTuples, target: RateTarget) -> Optimum:
    if len(tuples) == 0:
        raise InvalidArgument("empty tuple set")
    ok = target.satisfied(tuples.p0, tuples.p1)
    if not ok.any():
        return INFEASIBLE
    q = np.where(ok, tuples.qber, np.inf)
    i = int(np.argmin(q))
    return Optimum(float(tuples.mu0[i]), float(tuples.mu1[i]), float(tuples.p0[i]),
                   float(tuples.p1[i]), float(tuples.qber[i]), True)


def refine_optimum(opt: Optimum, target: RateTarget, etas: EtaMatrix, d: float,
                   grid: GridSpec, rounds: int = 4, iters: int = 40) -> Optimum:
    """Coordinate-wise golden-section search around a grid optimum.

    Works in log(mu) inside one grid cell either side of the node; a candidate is
    accepted only if it is feasible and lowers the QBER.
    """
    if not opt.feasible:
        return opt
    ratio = [(r[1] / r[0]) ** (1.0 / (grid.steps - 1)) for r in (grid.mu0_range, grid.mu1_range)]
    bounds = [(math.log(opt.mu0 / ratio[0]), math.log(opt.mu0 * ratio[0])),
              (math.log(opt.mu1 / ratio[1]), math.log(opt.mu1 * ratio[1]))]

    def cost(x):
        o = observables(None, etas, d, mu0=math.exp(x[0]), mu1=math.exp(x[1]))
        if not target.satisfied(o.p0, o.p1):
            return math.inf, o
        return o.qber, o

    best = [math.log(opt.mu0), math.log(opt.mu1)]
    best_q = opt.qber
    g = (math.sqrt(5) - 1) / 2
    for _ in range(rounds):
        for axis in (0, 1):
            a, b = bounds[axis]
            for _ in range(iters):
                c, e = b - g * (b - a), a + g * (b - a)
                xc, xe = list(best), list(best)
                xc[axis], xe[axis] = c, e
                if cost(xc)[0] <= cost(xe)[0]:
                    b = e
                else:
                    a = c
            x = list(best)
            x[axis] = 0.5 * (a + b)
            q, _ = cost(x)
            if q < best_q:
                best, best_q = x, q
    q, o = cost(best)
    if not math.isfinite(q):
        return opt
    return Optimum(math.exp(best[0]), math.exp(best[1]), float(o.p0), float(o.p1), float(q), True)


@dataclass(frozen=True)
class SweepRecord:
    transmission: float
    loss_db: float
    optimum: Optimum
    threshold: float
    threshold_clamped: bool
    succeeds: bool


def sweep_transmission(T_values, baseline=(BASELINE_P0, BASELINE_P1), grid: GridSpec | None = None,
                       etas: EtaMatrix | None = None, d: float = 2.4e-4,
                       abort: AbortModel | None = None, tolerance: float = 0.05,
                       mode: str = "per_detector", refine: bool = False,
                       tuples: GridTuples | None = None) -> list[SweepRecord]:
    grid = grid or GridSpec()
    abort = abort or AbortModel()
    if tuples is None:
        if etas is None:
            raise InvalidArgument("sweep needs either etas or precomputed tuples")
        tuples = scan_grid(grid, etas, d)
    records = []
    for T in T_values:
        if not 0 < T <= 1:
            raise InvalidArgument(f"transmission {T} outside (0, 1]")
        target = RateTarget(float(T), baseline[0], baseline[1], tolerance, mode)
        opt = min_qber_at_rates(tuples, target)
        if refine and etas is not None:
            opt = refine_optimum(opt, target, etas, d, grid)
        loss = loss_db_for(T)
        thr, clamped = abort.threshold(loss)
        ok = opt.feasible and opt.qber < min(QBER_CEILING, thr)
        records.append(SweepRecord(float(T), loss, opt, thr, clamped, bool(ok)))
    return records


def monotonicity_violations(records: list[SweepRecord]) -> list[int]:
    """Indices where optimal QBER rises as T falls (records ordered by decreasing T)."""
    ordered = sorted(range(len(records)), key=lambda i: -records[i].transmission)
    bad = []
    for prev, cur in zip(ordered, ordered[1:]):
        a, b = records[prev].optimum, records[cur].optimum
        if a.feasible and b.feasible and b.qber > a.qber:
            bad.append(cur)
    return bad
