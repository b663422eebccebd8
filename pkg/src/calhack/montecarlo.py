"""Pulse-by-pulse BB84 session simulator, used as the oracle for the closed forms.

Clicks are sampled from photon statistics rather than from closed-form click
probabilities: each port receives a Poisson number of detected photons
(thinned by routing and efficiency) and dark counts are independent Bernoulli
events. Pulses are processed in fixed-size blocks, each with its own random
stream derived from the master seed and the block index, so results do not
depend on how blocks are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from .attack import AttackParams, AttackTiming, EtaMatrix, observables
from .detector import DetectorPair, default_hacked_pair, default_intrinsic_pair

BLOCK = 1 << 16
DEFAULT_ALICE_MU = 2.08
FLAG_PVALUE = 0.0027  # two-sided tail of a 3-sigma normal deviate


@dataclass(frozen=True)
class SessionConfig:
    n_pulses: int
    alice_mu: float = DEFAULT_ALICE_MU
    transmission: float = 1.0
    bob_loss_db: float = 3.0
    attack: AttackParams | None = None
    pair: DetectorPair = field(default_factory=default_intrinsic_pair)
    seed: int = 0
    visibility: float = 1.0
    signal_time: float = 0.0

    def __post_init__(self):
        if self.n_pulses < 1:
            raise ValueError("n_pulses must be >= 1")
        if not 0 <= self.transmission <= 1:
            raise ValueError("transmission must lie in [0, 1]")
        if self.bob_loss_db < 0:
            raise ValueError("bob_loss_db must be >= 0")


@dataclass(frozen=True)
class SiftedKeyStats:
    n_pulses: int
    sifted: int
    arrivals: int
    clicks_d0: int
    clicks_d1: int
    doubles: int
    errors: int

    @property
    def empirical_p0(self) -> float:
        return self.clicks_d0 / self.sifted if self.sifted else 0.0

    @property
    def empirical_p1(self) -> float:
        return self.clicks_d1 / self.sifted if self.sifted else 0.0

    @property
    def empirical_p_double(self) -> float:
        return self.doubles / self.sifted if self.sifted else 0.0

    @property
    def empirical_qber(self) -> float:
        return self.errors / self.arrivals if self.arrivals else 0.0

    @property
    def sifted_fraction(self) -> float:
        return self.sifted / self.n_pulses

    def __add__(self, other: "SiftedKeyStats") -> "SiftedKeyStats":
        return SiftedKeyStats(*(a + b for a, b in zip(_fields(self), _fields(other))))

    def as_dict(self) -> dict:
        return {"n_pulses": self.n_pulses, "sifted": self.sifted, "arrivals": self.arrivals,
                "clicks_d0": self.clicks_d0, "clicks_d1": self.clicks_d1,
                "doubles": self.doubles, "errors": self.errors,
                "empirical_p0": self.empirical_p0, "empirical_p1": self.empirical_p1,
                "empirical_p_double": self.empirical_p_double,
                "empirical_qber": self.empirical_qber}


def _fields(s: SiftedKeyStats):
    return (s.n_pulses, s.sifted, s.arrivals, s.clicks_d0, s.clicks_d1, s.doubles, s.errors)


def _block_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _simulate_block(cfg: SessionConfig, n: int, rng: np.random.Generator) -> SiftedKeyStats:
    pair = cfg.pair
    a_basis = rng.integers(0, 2, n)
    a_bit = rng.integers(0, 2, n)
    b_basis = rng.integers(0, 2, n)
    keep = a_basis == b_basis
    m = int(keep.sum())
    a_basis, a_bit = a_basis[keep], a_bit[keep]

    if cfg.attack is None:
        mu = cfg.alice_mu * cfg.transmission * 10.0 ** (-cfg.bob_loss_db / 10.0)
        frac_right = 0.5 * (1.0 + cfg.visibility)
        frac0 = np.where(a_bit == 0, frac_right, 1.0 - frac_right)
        eta0 = float(pair.eta(0, cfg.signal_time))
        eta1 = float(pair.eta(1, cfg.signal_time))
        lam0 = mu * frac0 * eta0
        lam1 = mu * (1.0 - frac0) * eta1
    else:
        att = cfg.attack
        e_basis = rng.integers(0, 2, m)
        guess = rng.integers(0, 2, m)
        e_bit = np.where(e_basis == a_basis, a_bit, guess)
        # faked state: opposite basis, opposite bit, brightness/timing by Eve's bit
        f_basis = 1 - e_basis
        f_bit = 1 - e_bit
        mu = np.where(e_bit == 0, att.mu0, att.mu1) * att.eve_efficiency
        arrival = np.where(e_bit == 0, att.timing.t0, att.timing.t1)
        eta0 = pair.eta(0, arrival)
        eta1 = pair.eta(1, arrival)
        aligned = f_basis == a_basis  # Bob measures in Alice's basis after sifting
        frac0 = np.where(aligned, (f_bit == 0).astype(float), 0.5)
        lam0 = mu * frac0 * eta0
        lam1 = mu * (1.0 - frac0) * eta1

    click0 = (rng.poisson(lam0) > 0) | (rng.random(m) < pair.d0_params.dark_count)
    click1 = (rng.poisson(lam1) > 0) | (rng.random(m) < pair.d1_params.dark_count)
    double = click0 & click1
    arrived = click0 | click1
    coin = rng.integers(0, 2, m)
    bob_bit = np.where(double, coin, np.where(click1, 1, 0))
    errors = arrived & (bob_bit != a_bit)
    return SiftedKeyStats(n, m, int(arrived.sum()), int(click0.sum()), int(click1.sum()),
                          int(double.sum()), int(errors.sum()))


def simulate_session(cfg: SessionConfig) -> SiftedKeyStats:
    total = SiftedKeyStats(0, 0, 0, 0, 0, 0, 0)
    n_blocks = -(-cfg.n_pulses // BLOCK)
    for k in range(n_blocks):
        n = min(BLOCK, cfg.n_pulses - k * BLOCK)
        total = total + _simulate_block(cfg, n, _block_rng(cfg.seed, k))
    return total


DEFAULT_VALIDATION_POINTS = ((2.0, 25.0), (10.0, 40.0), (30.0, 60.0), (65.0, 21.0), (95.0, 115.0))


@dataclass(frozen=True)
class ZRow:
    point: int
    mu0: float
    mu1: float
    observable: str
    analytic: float
    empirical: float
    sigma: float
    z: float
    p_value: float
    count: int
    trials: int
    flagged: bool


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple[ZRow, ...]
    n_pulses: int
    low_power: bool

    @property
    def flagged(self) -> list[ZRow]:
        return [r for r in self.rows if r.flagged]

    @property
    def max_abs_z(self) -> float:
        return max(abs(r.z) for r in self.rows)


def _z_row(point, mu0, mu1, name, analytic, count, trials) -> ZRow:
    p = min(max(analytic, 0.0), 1.0)
    sigma = math.sqrt(p * (1.0 - p) / trials) if trials else math.inf
    emp = count / trials if trials else math.nan
    z = (emp - analytic) / sigma if sigma > 0 else (0.0 if emp == analytic else math.inf)
    pval = binomtest(count, trials, p).pvalue if trials and 0 < p < 1 else 1.0
    return ZRow(point, mu0, mu1, name, analytic, emp, sigma, z, pval, count, trials,
                pval < FLAG_PVALUE)


def validate_closed_forms(points=DEFAULT_VALIDATION_POINTS, n_pulses: int = 1_000_000,
                          seed: int = 0, pair: DetectorPair | None = None,
                          timing: AttackTiming = AttackTiming(),
                          perturb_sigma: float = 0.0,
                          max_qber_sigma: float = 0.005) -> ValidationReport:
    """Compare closed-form observables against simulated sessions; one z-score per cell.

    ``perturb_sigma`` shifts every analytic value by that many standard errors
    before testing, to check that the harness flags disagreement. The report is
    marked low-power when any QBER cell has a binomial sigma above ``max_qber_sigma``.
    """
    pair = pair or default_hacked_pair()
    if len(points) < 3:
        raise ValueError("validation needs at least 3 (mu0, mu1) points")
    etas = EtaMatrix.from_pair(pair, timing)
    d = pair.mean_dark
    rows = []
    low_power = False
    for i, (mu0, mu1) in enumerate(points):
        params = AttackParams(mu0, mu1, timing)
        obs = observables(params, etas, d)
        stats = simulate_session(SessionConfig(n_pulses, attack=params, pair=pair,
                                               seed=seed + 7919 * i))
        cells = (("p0", obs.p0, stats.clicks_d0, stats.sifted),
                 ("p1", obs.p1, stats.clicks_d1, stats.sifted),
                 ("p_double", obs.p_double, stats.doubles, stats.sifted),
                 ("qber", obs.qber, stats.errors, stats.arrivals))
        for name, analytic, count, trials in cells:
            if perturb_sigma:
                analytic = analytic + perturb_sigma * math.sqrt(analytic * (1 - analytic) / trials)
            row = _z_row(i, mu0, mu1, name, analytic, count, trials)
            if name == "qber":
                low_power |= not row.sigma <= max_qber_sigma
            rows.append(row)
    return ValidationReport(tuple(rows), n_pulses, low_power)


__all__ = ["SessionConfig", "SiftedKeyStats", "simulate_session", "validate_closed_forms",
           "ValidationReport", "ZRow", "DEFAULT_VALIDATION_POINTS"]

