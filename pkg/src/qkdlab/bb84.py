"""Single-photon BB84 sessions under partial intercept-resend with deletion.

A session is simulated as arrays over all sent qubits.  Eve attacks a random
fraction of them right at the transmitter, measures in her chosen basis and
applies a deletion policy to her outcomes.  Qubits she keeps are forwarded
without loss. The rest go through the lossy channel. Babe measures in a
random BB84 basis, bases are sifted, and a random subset of the sifted key
is sacrificed to estimate the QBER.

Per-qubit bookkeeping uses ``-1`` for "not applicable" in integer arrays.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

import numpy as np

from .quantum_core import (
    BREIDBART_BASIS,
    MeasBasis,
    bb84_angles,
    bb84_ensemble,
    measure_angles,
    outcome_bit_joint,
    prob0_angles,
)
from .rng import RngStream

#: Error probability on a sifted qubit that Eve measured in the Breidbart basis
#: and resent (2 cos^2(pi/8) sin^2(pi/8)).
BREIDBART_ERROR = 0.25


class DeletionPolicy(enum.Enum):
    NONE = "none"
    DELETE_BIT_ONE = "delete_bit_one"
    DELETE_LOW_CONFIDENCE = "delete_low_confidence"


@dataclass(frozen=True)
class Bb84Config:
    n_sent: int
    eta: float = 0.1
    attack_fraction: float = 0.0
    attack_basis: MeasBasis = BREIDBART_BASIS
    deletion_policy: DeletionPolicy = DeletionPolicy.NONE
    deletion_threshold: float = 0.9
    check_fraction: float = 0.1
    qber_threshold: float = 0.11
    intrinsic_error: float = 0.0
    match_arrival_rate: bool = False

    def __post_init__(self) -> None:
        if self.n_sent < 1:
            raise ValueError(f"n_sent must be >= 1, got {self.n_sent}")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        for name in ("attack_fraction", "deletion_threshold", "check_fraction",
                     "qber_threshold", "intrinsic_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        object.__setattr__(self, "deletion_policy", DeletionPolicy(self.deletion_policy))
        if self.match_arrival_rate:
            unattacked_eta(self)  # raises if infeasible


@dataclass(frozen=True)
class SessionTranscript:
    """Everything that happened to every qubit in one session."""

    adam_bits: np.ndarray
    adam_bases: np.ndarray
    attacked: np.ndarray
    eve_outcomes: np.ndarray
    deleted: np.ndarray
    arrived: np.ndarray
    babe_bases: np.ndarray
    babe_outcomes: np.ndarray
    sifted_positions: np.ndarray
    checked_positions: np.ndarray
    key_positions: np.ndarray
    qber_observed: float
    aborted: bool

    @property
    def n_sent(self) -> int:
        return int(self.adam_bits.size)

    @property
    def lost(self) -> np.ndarray:
        return ~self.deleted & ~self.arrived

    @property
    def sifted_key(self) -> np.ndarray:
        """Babe's bits at the key positions (check bits excluded)."""
        return self.babe_outcomes[self.key_positions]

    @property
    def adam_key(self) -> np.ndarray:
        return self.adam_bits[self.key_positions]


class QberEstimate(NamedTuple):
    qber: float
    checked_positions: np.ndarray
    key_positions: np.ndarray


@dataclass(frozen=True)
class KeyBiasReport:
    zero_fraction: float
    expected_fluctuation: float
    bias_sigmas: float
    key_length: int
    n_sessions: int


def max_attack_fraction(qber_budget: float, per_attacked_error: float) -> float:
    """Largest attacked fraction whose QBER contribution fits in ``qber_budget``."""
    if per_attacked_error <= 0:
        raise ValueError("per_attacked_error must be > 0")
    return min(1.0, max(0.0, qber_budget) / per_attacked_error)


def eve_keep_probabilities(config: Bb84Config) -> np.ndarray:
    """P(Eve keeps | her outcome) for outcomes 0 and 1 under the deletion policy."""
    policy = config.deletion_policy
    if policy is DeletionPolicy.NONE:
        return np.array([1.0, 1.0])
    if policy is DeletionPolicy.DELETE_BIT_ONE:
        return np.array([1.0, 0.0])
    states, bits, priors = bb84_ensemble()
    joint = outcome_bit_joint(states, bits, priors, config.attack_basis)
    p_out = joint.sum(axis=1)
    conf = np.divide(joint.max(axis=1), p_out, out=np.zeros(2), where=p_out > 0)
    return (conf >= config.deletion_threshold).astype(float)


def eve_keep_rate(config: Bb84Config) -> float:
    """P(an attacked qubit is forwarded) averaged over the BB84 ensemble."""
    states, bits, priors = bb84_ensemble()
    p_out = outcome_bit_joint(states, bits, priors, config.attack_basis).sum(axis=1)
    return float(p_out @ eve_keep_probabilities(config))


def unattacked_eta(config: Bb84Config) -> float:
    """Survival probability Eve imposes on qubits she does not attack.

    Without rate matching this is the channel ``eta``.  With rate matching,
    Eve lowers it so Babe's arrival rate equals the no-attack rate ``eta``.
    """
    if not config.match_arrival_rate or config.attack_fraction == 0.0:
        return config.eta
    f = config.attack_fraction
    if f >= 1.0:
        raise ValueError("rate matching needs attack_fraction < 1")
    kept = f * eve_keep_rate(config)
    eta_u = (config.eta - kept) / (1.0 - f)
    if eta_u < 0.0:
        raise ValueError(
            f"cannot match arrival rate: kept attacked qubits ({kept:.4g}) exceed eta ({config.eta})"
        )
    return eta_u


def estimate_qber(
    transcript: SessionTranscript, check_fraction: float, rng: RngStream
) -> QberEstimate:
    """Sacrifice a random ``check_fraction`` of the sifted positions to estimate the QBER."""
    return _estimate_qber(
        transcript.adam_bits, transcript.babe_outcomes, transcript.sifted_positions,
        check_fraction, rng,
    )


def _estimate_qber(adam_bits, babe_bits, sifted, check_fraction, rng) -> QberEstimate:
    n = sifted.size
    if n == 0:
        raise ValueError("sifted key is empty")
    if not 0.0 <= check_fraction <= 1.0:
        raise ValueError(f"check_fraction must be in [0, 1], got {check_fraction}")
    n_check = min(n, math.ceil(check_fraction * n))
    chosen = np.zeros(n, dtype=bool)
    chosen[rng.choice(n, size=n_check, replace=False)] = True
    checked, key = sifted[chosen], sifted[~chosen]
    if n_check == 0:
        return QberEstimate(math.nan, checked, key)
    errors = int(np.count_nonzero(adam_bits[checked] != babe_bits[checked]))
    return QberEstimate(errors / n_check, checked, key)


def run_session(config: Bb84Config, rng: RngStream) -> SessionTranscript:
    n = config.n_sent
    adam_bits = rng.integers(0, 2, n, dtype=np.int8)
    adam_bases = rng.integers(0, 2, n, dtype=np.int8)
    state_angles = bb84_angles(adam_bits, adam_bases)

    attacked = rng.random(n) < config.attack_fraction
    eve_outcomes = np.full(n, -1, dtype=np.int8)
    eve_out, resent = measure_angles(state_angles[attacked], config.attack_basis.angle, rng)
    eve_outcomes[attacked] = eve_out
    arriving_angles = state_angles.copy()
    arriving_angles[attacked] = resent

    keep_p = eve_keep_probabilities(config)
    deleted = np.zeros(n, dtype=bool)
    deleted[attacked] = rng.random(eve_out.size) >= keep_p[eve_out]

    survive = rng.random(n) < unattacked_eta(config)
    arrived = np.where(attacked, ~deleted, survive)

    babe_bases = rng.integers(0, 2, n, dtype=np.int8)
    babe_angles = babe_bases * (np.pi / 4)
    p0 = prob0_angles(arriving_angles, babe_angles)
    raw = (rng.random(n) >= p0).astype(np.int8)
    flips = (rng.random(n) < config.intrinsic_error).astype(np.int8)
    babe_outcomes = np.where(arrived, raw ^ flips, -1).astype(np.int8)

    sifted = np.flatnonzero(arrived & (adam_bases == babe_bases))
    if sifted.size:
        est = _estimate_qber(adam_bits, babe_outcomes, sifted, config.check_fraction, rng)
    else:
        est = QberEstimate(math.nan, sifted, sifted)
    aborted = bool(est.qber > config.qber_threshold) if not math.isnan(est.qber) else False
    return SessionTranscript(
        adam_bits=adam_bits,
        adam_bases=adam_bases,
        attacked=attacked,
        eve_outcomes=eve_outcomes,
        deleted=deleted,
        arrived=arrived,
        babe_bases=babe_bases,
        babe_outcomes=babe_outcomes,
        sifted_positions=sifted,
        checked_positions=est.checked_positions,
        key_positions=est.key_positions,
        qber_observed=est.qber,
        aborted=aborted,
    )


def key_bias_report(transcripts: Iterable[SessionTranscript]) -> KeyBiasReport:
    """Pooled fraction of zeros in the sifted keys of non-aborted sessions."""
    zeros = 0
    length = 0
    sessions = 0
    for tr in transcripts:
        if tr.aborted:
            continue
        key = tr.sifted_key
        zeros += int(np.count_nonzero(key == 0))
        length += int(key.size)
        sessions += 1
    if sessions == 0:
        raise ValueError("every session aborted; no key to assess")
    if length == 0:
        raise ValueError("non-aborted sessions produced an empty key")
    zero_fraction = zeros / length
    fluctuation = 1.0 / (2.0 * math.sqrt(length))
    return KeyBiasReport(
        zero_fraction=zero_fraction,
        expected_fluctuation=fluctuation,
        bias_sigmas=(zero_fraction - 0.5) / fluctuation,
        key_length=length,
        n_sessions=sessions,
    )


# --- closed-form composition --------------------------------------------------

@dataclass(frozen=True)
class SessionExpectation:
    arrival_rate: float
    sift_rate: float
    attacked_sifted_fraction: float
    qber: float
    zero_fraction: float


def expected_session(config: Bb84Config) -> SessionExpectation:
    """Expected per-qubit rates from exact enumeration of Born probabilities.

    Sums over Adam's bit and basis, Eve's outcome and Babe's basis, so it is
    valid for any attack basis and deletion policy.
    """
    f = config.attack_fraction
    keep_p = eve_keep_probabilities(config)
    eta_u = unattacked_eta(config)
    eps = config.intrinsic_error
    phi = config.attack_basis.angle

    p_att_sift = 0.0   # P(attacked, kept, sifted)
    err_att = 0.0      # P(attacked, kept, sifted, Babe's raw bit wrong)
    zero_att = 0.0     # P(attacked, kept, sifted, Babe's raw bit 0)
    for bit in (0, 1):
        for basis in (0, 1):
            theta = float(bb84_angles(bit, basis))
            p_eve0 = float(prob0_angles(theta, phi))
            for eve, p_eve in ((0, p_eve0), (1, 1.0 - p_eve0)):
                w = 0.25 * 0.5 * p_eve * keep_p[eve]  # Adam state, matching Babe basis
                babe0 = float(prob0_angles(phi + eve * math.pi / 2, basis * math.pi / 4))
                p_att_sift += w
                zero_att += w * babe0
                err_att += w * (1.0 - babe0 if bit == 0 else babe0)
    p_att_sift *= f
    zero_att *= f
    err_att *= f
    p_clean_sift = (1.0 - f) * eta_u * 0.5

    arrival = f * eve_keep_rate(config) + (1.0 - f) * eta_u
    sift = p_att_sift + p_clean_sift
    if sift == 0.0:
        return SessionExpectation(arrival, 0.0, 0.0, math.nan, math.nan)
    g = p_att_sift / sift
    raw_err = err_att / sift
    raw_zero = (zero_att + 0.5 * p_clean_sift) / sift
    return SessionExpectation(
        arrival_rate=arrival,
        sift_rate=sift,
        attacked_sifted_fraction=g,
        qber=raw_err * (1.0 - eps) + (1.0 - raw_err) * eps,
        zero_fraction=raw_zero * (1.0 - eps) + (1.0 - raw_zero) * eps,
    )
