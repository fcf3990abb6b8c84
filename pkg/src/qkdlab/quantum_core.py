"""Two-level state algebra for BB84-type signals.

States and bases are kept deliberately small: a :class:`QubitState` is an
amplitude pair and a :class:`MeasBasis` is a rotation angle on the real great
circle, which is where all BB84 and Breidbart geometry lives.  The
vectorised ``*_angles`` helpers work on real-angle parameterised states so
protocol simulations can run on numpy arrays.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import RngStream

NORM_TOL = 1e-12

#: Orientation of the Breidbart basis, halfway between Z and X.
BREIDBART_ANGLE = math.pi / 8
#: Success probability of guessing a BB84 bit from a Breidbart measurement.
BREIDBART_SUCCESS = math.cos(math.pi / 8) ** 2


class BasisLabel(enum.Enum):
    Z = "Z"
    X = "X"
    BREIDBART = "Breidbart"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class QubitState:
    amp0: complex
    amp1: complex
    label: str = ""

    @property
    def norm_squared(self) -> float:
        return abs(self.amp0) ** 2 + abs(self.amp1) ** 2

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return abs(self.norm_squared - 1.0) <= tol

    def overlap(self, other: "QubitState") -> complex:
        """Inner product <self|other>."""
        return self.amp0.conjugate() * other.amp0 + self.amp1.conjugate() * other.amp1

    def fidelity(self, other: "QubitState") -> float:
        """|<self|other>|^2, insensitive to global phase."""
        return abs(self.overlap(other)) ** 2

    @classmethod
    def from_angle(cls, theta: float, label: str = "") -> "QubitState":
        return cls(complex(math.cos(theta)), complex(math.sin(theta)), label)


@dataclass(frozen=True)
class MeasBasis:
    """Orthonormal basis rotated by ``angle`` from the computational one.

    The 0-eigenstate is ``cos(a)|0> + sin(a)|1>`` and the 1-eigenstate is
    ``-sin(a)|0> + cos(a)|1>``.
    """

    angle: float
    label: BasisLabel = BasisLabel.CUSTOM

    def eigenstate(self, outcome: int) -> QubitState:
        if outcome == 0:
            return QubitState.from_angle(self.angle, f"{self.label.value}0")
        if outcome == 1:
            return QubitState.from_angle(self.angle + math.pi / 2, f"{self.label.value}1")
        raise ValueError(f"outcome must be 0 or 1, got {outcome}")


Z_BASIS = MeasBasis(0.0, BasisLabel.Z)
X_BASIS = MeasBasis(math.pi / 4, BasisLabel.X)
BREIDBART_BASIS = MeasBasis(BREIDBART_ANGLE, BasisLabel.BREIDBART)

_BB84_BASES = {"Z": Z_BASIS, "X": X_BASIS, 0: Z_BASIS, 1: X_BASIS}


def bb84_state(bit: int, basis: str | int) -> QubitState:
    """Canonical BB84 state for ``bit`` prepared in ``basis`` ("Z"/0 or "X"/1)."""
    if bit not in (0, 1):
        raise ValueError(f"bit must be 0 or 1, got {bit}")
    try:
        b = _BB84_BASES[basis]
    except KeyError:
        raise ValueError(f"basis must be 'Z' or 'X', got {basis!r}") from None
    label = f"{bit}{b.label.value}"
    if b is Z_BASIS:
        return QubitState(1 + 0j, 0j, label) if bit == 0 else QubitState(0j, 1 + 0j, label)
    s = 1 / math.sqrt(2)
    return QubitState(complex(s), complex(s if bit == 0 else -s), label)


def bb84_ensemble() -> tuple[list[QubitState], list[int], list[float]]:
    """The four BB84 states with their bit values and uniform priors."""
    states = [bb84_state(bit, basis) for basis in ("Z", "X") for bit in (0, 1)]
    bits = [0, 1, 0, 1]
    return states, bits, [0.25] * 4


def born_probability(state: QubitState, basis: MeasBasis) -> tuple[float, float]:
    """Outcome probabilities (p0, p1) of measuring ``state`` in ``basis``."""
    if not state.is_normalized():
        raise ValueError(
            f"state is not normalized: |amp0|^2 + |amp1|^2 = {state.norm_squared!r}"
        )
    p0 = basis.eigenstate(0).fidelity(state)
    p0 = min(1.0, max(0.0, p0))
    return p0, 1.0 - p0


def measure_and_resend(
    state: QubitState, basis: MeasBasis, rng: RngStream
) -> tuple[int, QubitState]:
    """Projective measurement followed by preparation of the observed eigenstate."""
    p0, _ = born_probability(state, basis)
    outcome = 0 if rng.random() < p0 else 1
    return outcome, basis.eigenstate(outcome)


# --- vectorised real-angle helpers -------------------------------------------

def prob0_angles(state_angle, basis_angle):
    """P(outcome 0) for real states at ``state_angle`` measured at ``basis_angle``."""
    return np.cos(np.asarray(state_angle) - np.asarray(basis_angle)) ** 2


def bb84_angles(bits, bases):
    """State angles for arrays of BB84 bits and bases (0 = Z, 1 = X).

    Z-basis bits sit at 0 and pi/2; X-basis bits at pi/4 and -pi/4.
    """
    bits = np.asarray(bits)
    bases = np.asarray(bases)
    return np.where(bases == 0, bits * (np.pi / 2), np.pi / 4 - bits * (np.pi / 2))


def measure_angles(state_angles, basis_angle, rng: RngStream):
    """Vectorised measure-and-resend on real states.

    Returns ``(outcomes, resent_angles)``.
    """
    p0 = prob0_angles(state_angles, basis_angle)
    outcomes = (rng.random(np.shape(p0)) >= p0).astype(np.int8)
    resent = np.asarray(basis_angle) + outcomes * (np.pi / 2)
    return outcomes, resent


# --- postselection explorer -------------------------------------------------

@dataclass(frozen=True)
class DeletionResult:
    best_basis_angle: float
    kept_outcomes: tuple[int, ...]
    guesses: tuple[int, ...]
    threshold: float
    success_prob: float
    kept_fraction: float

    @property
    def best_rule(self) -> str:
        kept = ", ".join(f"{o}->guess {g}" for o, g in zip(self.kept_outcomes, self.guesses))
        return f"delete outcomes with posterior confidence < {self.threshold:.4f}; keep [{kept}]"


def outcome_bit_joint(
    states: Sequence[QubitState],
    bits: Sequence[int],
    priors: Sequence[float],
    basis: MeasBasis,
) -> np.ndarray:
    """Joint table ``P[outcome, bit]`` for a labelled ensemble measured in ``basis``."""
    joint = np.zeros((2, 2))
    for state, bit, prior in zip(states, bits, priors):
        p0, p1 = born_probability(state, basis)
        joint[0, bit] += prior * p0
        joint[1, bit] += prior * p1
    return joint


def optimal_deletion_advantage(
    states: Sequence[QubitState],
    bits: Sequence[int],
    priors: Sequence[float],
    deletion_budget: float,
    basis_grid: int = 720,
    n_thresholds: int = 100,
) -> DeletionResult:
    """Brute-force search for the best projective measurement plus deletion rule.

    For every basis angle on a grid over [0, pi) and every confidence
    threshold, outcomes whose posterior confidence on the bit falls below the
    threshold are deleted.  A rule is admissible when the kept outcome mass is
    at least ``1 - deletion_budget``; the figure of merit is the probability
    of guessing the bit correctly conditioned on keeping the result.
    """
    if len(states) == 0:
        raise ValueError("ensemble is empty")
    if not (len(states) == len(bits) == len(priors)):
        raise ValueError("states, bits and priors must have equal length")
    if not math.isclose(math.fsum(priors), 1.0, abs_tol=1e-9):
        raise ValueError(f"priors must sum to 1, got {math.fsum(priors)}")
    if not 0.0 <= deletion_budget < 1.0:
        raise ValueError(f"deletion_budget must be in [0, 1), got {deletion_budget}")

    thresholds = np.linspace(0.5, 1.0, n_thresholds)
    best: DeletionResult | None = None
    for angle in np.arange(basis_grid) * (math.pi / basis_grid):
        joint = outcome_bit_joint(states, bits, priors, MeasBasis(float(angle)))
        p_out = joint.sum(axis=1)
        correct = joint.max(axis=1)
        guesses = joint.argmax(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            confidence = np.where(p_out > 0, correct / p_out, 0.0)
        seen: set[tuple[int, ...]] = set()
        for thr in thresholds:
            keep = tuple(int(o) for o in (0, 1) if p_out[o] > 0 and confidence[o] >= thr - 1e-12)
            if not keep or keep in seen:
                continue
            seen.add(keep)
            kept_mass = float(sum(p_out[o] for o in keep))
            if kept_mass < 1.0 - deletion_budget - 1e-12:
                continue
            success = float(sum(correct[o] for o in keep)) / kept_mass
            if best is None or success > best.success_prob + 1e-12:
                best = DeletionResult(
                    best_basis_angle=float(angle),
                    kept_outcomes=keep,
                    guesses=tuple(int(guesses[o]) for o in keep),
                    threshold=float(thr),
                    success_prob=success,
                    kept_fraction=kept_mass,
                )
    assert best is not None  # threshold 0.5 keeps every outcome with support
    return best
