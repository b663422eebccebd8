"""Closed-form faked-state attack against a detector pair with induced mismatch.

Eve measures each of Alice's states in a random basis and resends the opposite
bit in the opposite basis, with mean photon number ``mu[b]`` at time ``t[b]``
where ``b`` is her measured bit. Only the sifted events (Bob's basis equal to
Alice's) are modelled here.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

import numpy as np

from .detector import ATTACK_T0, ATTACK_T1, DetectorPair, click_probability
from .errors import InvalidArgument, UndefinedQber

BASES = ("Z", "X")


@dataclass(frozen=True)
class AttackTiming:
    t0: float = ATTACK_T0
    t1: float = ATTACK_T1

    def __post_init__(self):
        if self.t0 == self.t1:
            raise InvalidArgument("attack times t0 and t1 must differ")

    def time(self, bit: int) -> float:
        return self.t0 if bit == 0 else self.t1


@dataclass(frozen=True)
class AttackParams:
    mu0: float
    mu1: float
    timing: AttackTiming = AttackTiming()
    eve_efficiency: float = 1.0  # scales faked-state photons reaching Bob

    def __post_init__(self):
        if self.mu0 < 0 or self.mu1 < 0:
            raise InvalidArgument("faked-state mean photon numbers must be >= 0")
        if not 0 < self.eve_efficiency <= 1:
            raise InvalidArgument("eve_efficiency must lie in (0, 1]")

    def mu(self, bit: int) -> float:
        return (self.mu0 if bit == 0 else self.mu1) * self.eve_efficiency


@dataclass(frozen=True)
class EtaMatrix:
    """eta_jk: efficiency of detector j at attack time t_k."""

    eta00: float
    eta01: float
    eta10: float
    eta11: float

    def __post_init__(self):
        for name in ("eta00", "eta01", "eta10", "eta11"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidArgument(f"{name} must lie in [0, 1]")

    def get(self, detector: int, time_index: int) -> float:
        return ((self.eta00, self.eta01), (self.eta10, self.eta11))[detector][time_index]

    @classmethod
    def from_pair(cls, pair: DetectorPair, timing: AttackTiming = AttackTiming()) -> "EtaMatrix":
        return cls(float(pair.eta(0, timing.t0)), float(pair.eta(0, timing.t1)),
                   float(pair.eta(1, timing.t0)), float(pair.eta(1, timing.t1)))

    @classmethod
    def uniform(cls, eta: float) -> "EtaMatrix":
        return cls(eta, eta, eta, eta)


@dataclass(frozen=True)
class FakedState:
    basis: str
    bit: int
    mu: float
    arrival: float


@dataclass(frozen=True)
class AttackObservables:
    p0: np.ndarray | float
    p1: np.ndarray | float
    p_double: np.ndarray | float
    p_error: np.ndarray | float
    p_arrive: np.ndarray | float
    qber: np.ndarray | float


def _other_basis(basis: str) -> str:
    if basis not in BASES:
        raise InvalidArgument(f"basis must be 'Z' or 'X', got {basis!r}")
    return "X" if basis == "Z" else "Z"


def faked_state_for(eve_basis: str, eve_bit: int, params: AttackParams) -> FakedState:
    if eve_bit not in (0, 1):
        raise InvalidArgument(f"bit must be 0 or 1, got {eve_bit}")
    mu = params.mu0 if eve_bit == 0 else params.mu1
    return FakedState(_other_basis(eve_basis), 1 - eve_bit, mu, params.timing.time(eve_bit))


def eve_branches(alice: tuple[str, int]):
    """Yield ``(weight, (eve_basis, eve_bit))`` for Eve's measurement of one Alice state."""
    basis, bit = alice
    yield 0.5, (basis, bit)
    other = _other_basis(basis)
    yield 0.25, (other, 0)
    yield 0.25, (other, 1)


def case_click_probabilities(alice, eve_meas, params: AttackParams, etas: EtaMatrix,
                             d0: float, d1: float) -> tuple[float, float, float, float]:
    """Bob's (D0, D1, double, loss) probabilities for one Alice state and Eve outcome."""
    a_basis, a_bit = alice
    e_basis, e_bit = eve_meas
    _other_basis(a_basis)
    if e_basis == a_basis and e_bit != a_bit:
        raise InvalidArgument("Eve measuring in Alice's basis must obtain Alice's bit")
    state = faked_state_for(e_basis, e_bit, params)
    mu = params.mu(e_bit)
    if state.basis != a_basis:
        mus = (0.5 * mu, 0.5 * mu)
    else:
        mus = (mu, 0.0) if state.bit == 0 else (0.0, mu)
    p0 = click_probability(mus[0], etas.get(0, e_bit), d0)
    p1 = click_probability(mus[1], etas.get(1, e_bit), d1)
    both = p0 * p1
    return p0, p1, both, 1.0 - (p0 + p1 - both)


def enumerated_observables(params: AttackParams, etas: EtaMatrix, d0: float,
                           d1: float) -> AttackObservables:
    """Observables by summing every Alice state and Eve outcome (allows d0 != d1)."""
    p0 = p1 = pd = perr = parr = 0.0
    for a_basis, a_bit in product(BASES, (0, 1)):
        for w, eve in eve_branches((a_basis, a_bit)):
            c0, c1, both, loss = case_click_probabilities((a_basis, a_bit), eve, params, etas, d0, d1)
            w = 0.25 * w
            p0 += w * c0
            p1 += w * c1
            pd += w * both
            wrong = c1 if a_bit == 0 else c0
            perr += w * (wrong - 0.5 * both)
            parr += w * (1.0 - loss)
    if parr == 0:
        raise UndefinedQber("no light and no dark counts reach Bob")
    return AttackObservables(p0, p1, pd, perr, parr, perr / parr)


def observables(params: AttackParams | None, etas: EtaMatrix, d: float, mu0=None,
                mu1=None) -> AttackObservables:
    """Closed-form detection, double-click, error and arrival probabilities and QBER.

    ``mu0``/``mu1`` may be arrays (broadcast together) in place of ``params``.
    """
    if params is not None:
        mu0, mu1 = params.mu(0), params.mu(1)
    mu0 = np.asarray(mu0, dtype=float)
    mu1 = np.asarray(mu1, dtype=float)
    e00, e01, e10, e11 = etas.eta00, etas.eta01, etas.eta10, etas.eta11
    k = 1.0 - d

    def lit(x):  # 1 - exp(-x), accurate for small x
        return -np.expm1(-x)

    # 0.75 + 0.25d - 0.25k*sum(exp(-x)) rewritten around the dark floor d
    p0 = d + 0.25 * k * (lit(0.5 * mu0 * e00) + lit(0.5 * mu1 * e01) + lit(mu1 * e01))
    p1 = d + 0.25 * k * (lit(0.5 * mu0 * e10) + lit(0.5 * mu1 * e11) + lit(mu0 * e10))

    def click(x):
        return d + k * lit(x)

    p_double = 0.25 * (click(0.5 * mu0 * e00) * click(0.5 * mu0 * e10)
                       + click(0.5 * mu1 * e01) * click(0.5 * mu1 * e11)
                       + d * click(mu0 * e10) + d * click(mu1 * e01))
    p_error = (d - 0.5 * p_double
               + 0.125 * k * (lit(mu0 * e10) + 2 * lit(0.5 * mu0 * e10)
                              + lit(mu1 * e01) + 2 * lit(0.5 * mu1 * e01)))
    p_arrive = p0 + p1 - p_double
    if np.any(p_arrive == 0):
        raise UndefinedQber("arrival probability is zero")
    qber = p_error / p_arrive
    if qber.ndim == 0:
        return AttackObservables(float(p0), float(p1), float(p_double), float(p_error),
                                 float(p_arrive), float(qber))
    return AttackObservables(p0, p1, p_double, p_error, p_arrive, qber)


def ideal_fsa_qber(etas: EtaMatrix) -> float:
    """QBER of the attack with vanishing, equal faked-state brightness and no dark counts.

    Accumulated in exact rational arithmetic so symmetric inputs give exact ratios.
    """
    errors = clicks = Fraction(0)
    half = Fraction(1, 2)
    for a_basis, a_bit in product(BASES, (0, 1)):
        for w, (e_basis, e_bit) in eve_branches((a_basis, a_bit)):
            state = faked_state_for(e_basis, e_bit, AttackParams(1.0, 1.0))
            eta = [Fraction(etas.get(j, e_bit)) for j in (0, 1)]
            if state.basis != a_basis:
                rates = (half * eta[0], half * eta[1])
            else:
                rates = tuple(eta[j] if j == state.bit else Fraction(0) for j in (0, 1))
            w = Fraction(w)
            clicks += w * (rates[0] + rates[1])
            errors += w * rates[1 - a_bit]
    if clicks == 0:
        raise UndefinedQber("all efficiencies are zero")
    return float(errors / clicks)


def attack_observables_for(pair: DetectorPair, params: AttackParams) -> AttackObservables:
    return observables(params, EtaMatrix.from_pair(pair, params.timing), pair.mean_dark)


__all__ = [
    "AttackTiming", "AttackParams", "EtaMatrix", "FakedState", "AttackObservables",
    "faked_state_for", "eve_branches", "case_click_probabilities", "enumerated_observables",
    "observables", "ideal_fsa_qber", "attack_observables_for",
]

