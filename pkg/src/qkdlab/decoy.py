"""Weak-coherent sources, photon-number splitting and decoy-state checks.

A pulse carries two views of the same emission:

* the coherent view, a definite amplitude ``sqrt(S) e^{i phi}`` that a beam
  splitter divides deterministically;
* the photon-number view, a realised count ``n ~ Poisson(S)`` that can only
  be divided photon by photon.

Pulses are handled in batches (:class:`PulseBatch`, one array per field).
:class:`PulseRecord` is the single-pulse view of one batch row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Sequence

import numpy as np
from scipy import stats

from .rng import RngStream

UNSAMPLED = -1


@dataclass(frozen=True)
class DecoyScheme:
    """Intensity levels as ``(S, emission probability)`` pairs."""

    levels: tuple[tuple[float, float], ...]
    signal_index: int = 0

    def __post_init__(self) -> None:
        levels = tuple((float(s), float(p)) for s, p in self.levels)
        object.__setattr__(self, "levels", levels)
        if not levels:
            raise ValueError("scheme needs at least one level")
        s_values = [s for s, _ in levels]
        probs = [p for _, p in levels]
        if any(s < 0 for s in s_values):
            raise ValueError("S levels must be >= 0")
        if len(set(s_values)) != len(s_values):
            raise ValueError("S levels must be distinct")
        if any(p < 0 for p in probs) or not math.isclose(math.fsum(probs), 1.0, abs_tol=1e-9):
            raise ValueError(f"emission probabilities must be >= 0 and sum to 1, got {probs}")
        if not 0 <= self.signal_index < len(levels):
            raise ValueError("signal_index out of range")

    @property
    def s_values(self) -> np.ndarray:
        return np.array([s for s, _ in self.levels])

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.levels])


#: Presets for the two signal intensities commonly quoted.
SCHEME_S05 = DecoyScheme(((0.5, 0.5), (0.1, 0.5)))
SCHEME_S1 = DecoyScheme(((1.0, 0.5), (0.0, 0.5)))


@dataclass(frozen=True)
class PulseRecord:
    level_index: int
    s_level: float
    phase: float
    amplitude: complex
    realized_n: int
    eve_split_photons: int
    eve_split_amplitude: complex
    forwarded_n: int
    forwarded_amplitude: complex
    deleted: bool
    tagged: bool


@dataclass(frozen=True)
class PulseBatch:
    level_index: np.ndarray
    s_level: np.ndarray
    phase: np.ndarray
    amplitude: np.ndarray
    realized_n: np.ndarray
    eve_split_photons: np.ndarray
    eve_split_amplitude: np.ndarray
    forwarded_n: np.ndarray
    forwarded_amplitude: np.ndarray
    deleted: np.ndarray
    tagged: np.ndarray

    def __len__(self) -> int:
        return int(self.s_level.size)

    def record(self, i: int) -> PulseRecord:
        values = {}
        for f in fields(self):
            v = getattr(self, f.name)[i]
            values[f.name] = v.item() if hasattr(v, "item") else v
        return PulseRecord(**values)

    @classmethod
    def from_records(cls, records: Sequence[PulseRecord]) -> "PulseBatch":
        cols = {f.name: np.array([getattr(r, f.name) for r in records]) for f in fields(cls)}
        cols["amplitude"] = cols["amplitude"].astype(complex)
        cols["eve_split_amplitude"] = cols["eve_split_amplitude"].astype(complex)
        cols["forwarded_amplitude"] = cols["forwarded_amplitude"].astype(complex)
        return cls(**cols)

    @property
    def has_counts(self) -> bool:
        return bool(np.all(self.realized_n >= 0))


def _as_batch(pulses) -> tuple[PulseBatch, bool]:
    if isinstance(pulses, PulseRecord):
        return PulseBatch.from_records([pulses]), True
    return pulses, False


def _unwrap(batch: PulseBatch, single: bool):
    return batch.record(0) if single else batch


def emit_pulses(
    scheme: DecoyScheme, n: int, rng: RngStream, sample_counts: bool = True
) -> PulseBatch:
    """Emit ``n`` phase-randomised pulses; optionally draw their photon counts."""
    idx = rng.choice(len(scheme.levels), size=n, p=scheme.probabilities)
    s = scheme.s_values[idx]
    phase = rng.uniform(0.0, 2.0 * math.pi, n)
    amp = np.sqrt(s) * np.exp(1j * phase)
    counts = rng.poisson(s) if sample_counts else np.full(n, UNSAMPLED)
    counts = counts.astype(np.int64)
    return PulseBatch(
        level_index=idx,
        s_level=s,
        phase=phase,
        amplitude=amp,
        realized_n=counts,
        eve_split_photons=np.zeros(n, dtype=np.int64),
        eve_split_amplitude=np.zeros(n, dtype=complex),
        forwarded_n=counts.copy(),
        forwarded_amplitude=amp.copy(),
        deleted=np.zeros(n, dtype=bool),
        tagged=np.zeros(n, dtype=bool),
    )


def emit_pulse(scheme: DecoyScheme, rng: RngStream) -> PulseRecord:
    return emit_pulses(scheme, 1, rng).record(0)


def sample_counts(pulses, rng: RngStream):
    """Draw ``realized_n ~ Poisson(S)`` for pulses that do not have one yet."""
    batch, single = _as_batch(pulses)
    missing = batch.realized_n < 0
    n = batch.realized_n.copy()
    n[missing] = rng.poisson(batch.s_level[missing])
    return _unwrap(replace(batch, realized_n=n, forwarded_n=n.copy()), single)


def pns_split(pulses, rng: RngStream | None = None):
    """Photon-number splitting: take one photon from every multi-photon pulse.

    Split pulses are tagged and keep ``n - 1`` photons for lossless
    forwarding.  The operation is deterministic given the counts; ``rng`` is
    accepted for interface symmetry with the other attacks.
    """
    batch, single = _as_batch(pulses)
    if not batch.has_counts:
        raise ValueError("photon counts must be sampled before a PNS split")
    multi = batch.realized_n >= 2
    split = multi.astype(np.int64)
    return _unwrap(
        replace(
            batch,
            eve_split_photons=split,
            forwarded_n=batch.realized_n - split,
            tagged=multi,
        ),
        single,
    )


def coherent_split(pulses, kappa: float):
    """Beam-split the definite-phase amplitude, sending a fraction ``kappa`` of the energy to Eve."""
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must be in [0, 1], got {kappa}")
    batch, single = _as_batch(pulses)
    return _unwrap(
        replace(
            batch,
            eve_split_amplitude=math.sqrt(kappa) * batch.amplitude,
            forwarded_amplitude=math.sqrt(1.0 - kappa) * batch.amplitude,
        ),
        single,
    )


def count_photons(amplitudes, rng: RngStream) -> np.ndarray:
    """Photon counts of coherent states with the given amplitudes."""
    return rng.poisson(np.abs(np.asarray(amplitudes)) ** 2)


def binomial_split(pulses, kappa: float, rng: RngStream) -> np.ndarray:
    """Photon-number view of a beam splitter: each photon goes to Eve with probability ``kappa``."""
    batch, _ = _as_batch(pulses)
    if not batch.has_counts:
        raise ValueError("photon counts must be sampled before a binomial split")
    return rng.binomial(batch.realized_n, kappa)


# --- level discrimination --------------------------------------------------------

def likelihood_ratio_decide(counts, mean_a: float, mean_b: float, priors=(0.5, 0.5)) -> np.ndarray:
    """MAP decision between Poisson(mean_a) and Poisson(mean_b); ``True`` means "a".

    Ties go to "a".
    """
    counts = np.asarray(counts)
    la = priors[0] * stats.poisson.pmf(counts, mean_a)
    lb = priors[1] * stats.poisson.pmf(counts, mean_b)
    return la >= lb


def analytic_lr_success(mean_a: float, mean_b: float, priors=(0.5, 0.5)) -> float:
    """Exact success probability of the MAP photon-count rule."""
    hi = int(stats.poisson.isf(1e-16, max(mean_a, mean_b, 1e-12))) + 20
    k = np.arange(hi + 1)
    la = priors[0] * stats.poisson.pmf(k, mean_a)
    lb = priors[1] * stats.poisson.pmf(k, mean_b)
    return math.fsum(np.maximum(la, lb))


def threshold_rule_success(counts, truth_is_a, threshold: int, a_is_high: bool = True) -> float:
    """Empirical success of "guess a iff count >= threshold" (or < when ``a_is_high`` is False)."""
    counts = np.asarray(counts)
    guess_a = counts >= threshold if a_is_high else counts < threshold
    return float(np.mean(guess_a == np.asarray(truth_is_a)))


@dataclass(frozen=True)
class DiscriminationResult:
    success: float
    standard_error: float
    analytic: float
    n_trials: int

    @property
    def sigmas_off(self) -> float:
        d = self.success - self.analytic
        if d == 0.0:
            return 0.0
        return d / self.standard_error if self.standard_error > 0 else math.inf


def discriminate_levels_poisson(
    kappa: float,
    s_a: float,
    s_b: float,
    priors: tuple[float, float],
    n_trials: int,
    rng: RngStream,
) -> DiscriminationResult:
    """Eve guesses the intensity level from photon counts on her split-off arm.

    Equal levels are allowed and give success equal to the larger prior.
    """
    if not 0.0 <= kappa <= 1.0:
        raise ValueError(f"kappa must be in [0, 1], got {kappa}")
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    truth_a = rng.random(n_trials) < priors[0]
    s = np.where(truth_a, s_a, s_b)
    phase = rng.uniform(0.0, 2.0 * math.pi, n_trials)
    eve_amp = math.sqrt(kappa) * np.sqrt(s) * np.exp(1j * phase)
    counts = count_photons(eve_amp, rng)
    guess_a = likelihood_ratio_decide(counts, kappa * s_a, kappa * s_b, priors)
    correct = guess_a == truth_a
    p = float(np.mean(correct))
    se = float(np.std(correct, ddof=1)) / math.sqrt(n_trials) if n_trials > 1 else math.inf
    return DiscriminationResult(p, se, analytic_lr_success(kappa * s_a, kappa * s_b, priors), n_trials)


def helstrom_error(alpha: complex, beta: complex, priors=(0.5, 0.5)) -> float:
    """Minimum error probability for discriminating coherent states |alpha> and |beta>."""
    p_a, p_b = priors
    overlap2 = math.exp(-abs(complex(alpha) - complex(beta)) ** 2)
    return 0.5 * (1.0 - math.sqrt(max(0.0, 1.0 - 4.0 * p_a * p_b * overlap2)))


# --- channel, attacks and decoy checking ---------------------------------------------

def poisson_multi(s) -> np.ndarray:
    """P(n >= 2) for Poisson(s)."""
    s = np.asarray(s, dtype=float)
    return -np.expm1(-s) - s * np.exp(-s)


def honest_yield(s, eta: float) -> np.ndarray:
    """Click probability of a Poisson(s) pulse through transmittance ``eta``."""
    return -np.expm1(-eta * np.asarray(s, dtype=float))


@dataclass(frozen=True)
class Arrivals:
    """Babe-side outcome of a batch: which pulses produced a click."""

    pulses: PulseBatch
    clicked: np.ndarray


def transmit_honest(pulses: PulseBatch, eta: float, rng: RngStream) -> Arrivals:
    """Lossy channel: each photon survives independently with probability ``eta``."""
    survived = rng.binomial(pulses.realized_n, eta)
    return Arrivals(replace(pulses, forwarded_n=survived), survived > 0)


def naive_pns_forward_probs(scheme: DecoyScheme, eta: float) -> tuple[float, float]:
    """(r_multi, q_single) keeping Babe's total click rate at its no-attack value.

    Eve forwards every multi-photon pulse losslessly and passes single-photon
    pulses with probability ``q``.  When multi-photon pulses alone exceed the
    target rate she forwards only a fraction ``r`` of them and blocks singles.
    """
    s, p = scheme.s_values, scheme.probabilities
    target = float(p @ honest_yield(s, eta))
    multi = float(p @ poisson_multi(s))
    single = float(p @ (s * np.exp(-s)))
    if multi >= target:
        return (target / multi if multi > 0 else 0.0), 0.0
    return 1.0, (target - multi) / single


def transmit_naive_pns(
    pulses: PulseBatch,
    scheme: DecoyScheme,
    eta: float,
    rng: RngStream,
    strength: float = 1.0,
) -> Arrivals:
    """Naive PNS attack mixed with the honest channel.

    Each pulse is attacked with probability ``strength`` (Eve cannot see the
    level, so this is level-blind); unattacked pulses see the honest channel.
    Random draws are taken in a fixed order regardless of ``strength`` so
    different strengths are coupled on the same seed.
    """
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    n = pulses.realized_n
    u_attack = rng.random(len(pulses))
    u_forward = rng.random(len(pulses))
    honest = rng.binomial(n, eta)
    r, q = naive_pns_forward_probs(scheme, eta)
    split = pns_split(pulses)
    multi = n >= 2
    forwarded_attack = np.where(
        multi, np.where(u_forward < r, split.forwarded_n, 0),
        np.where((n == 1) & (u_forward < q), 1, 0),
    )
    attacked = u_attack < strength
    forwarded = np.where(attacked, forwarded_attack, honest)
    deleted = attacked & (forwarded_attack == 0) & (n > 0)
    out = replace(
        pulses,
        eve_split_photons=np.where(attacked, split.eve_split_photons, 0),
        forwarded_n=forwarded,
        tagged=attacked & multi & (forwarded > 0),
        deleted=deleted,
    )
    return Arrivals(out, forwarded > 0)


@dataclass(frozen=True)
class YieldCheck:
    s_levels: np.ndarray
    counts: np.ndarray
    clicks: np.ndarray
    yields: np.ndarray
    expected: np.ndarray
    z_scores: np.ndarray
    alarm: bool


def decoy_yield_check(
    arrivals: Arrivals, eta: float, tolerance_sigmas: float = 3.0
) -> YieldCheck:
    """Compare per-level click yields with the no-attack loss model.

    A level whose expected yield is exactly zero (vacuum without dark counts)
    raises the alarm on any click.
    """
    pulses = arrivals.pulses
    levels = np.unique(pulses.s_level)
    if levels.size < 2:
        raise ValueError("decoy yield check needs at least two intensity levels")
    counts = np.array([np.count_nonzero(pulses.s_level == s) for s in levels])
    clicks = np.array([np.count_nonzero(arrivals.clicked & (pulses.s_level == s)) for s in levels])
    yields = clicks / counts
    expected = honest_yield(levels, eta)
    sd = np.sqrt(counts * expected * (1.0 - expected))
    dev = clicks - counts * expected
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, dev / np.where(sd > 0, sd, 1.0), np.where(dev == 0, 0.0, np.inf))
    alarm = bool(np.any(np.abs(z) > tolerance_sigmas))
    return YieldCheck(levels, counts, clicks, yields, expected, z, alarm)


def nominal_false_alarm(tolerance_sigmas: float, n_levels: int) -> float:
    """Alarm probability of the yield check with no attack, under the normal approximation."""
    per_level = 2.0 * stats.norm.sf(tolerance_sigmas)
    return 1.0 - (1.0 - per_level) ** n_levels


@dataclass(frozen=True)
class TaggedFraction:
    fraction: float
    n_tagged: int
    expected_arrivals: float
    multi_photon_fraction: float
    single_throughput: float
    breach: bool


def tagged_fraction(records: PulseBatch, eta: float) -> TaggedFraction:
    """Share of Babe's arrivals that are tagged after a full PNS split.

    Tagged pulses reach Babe losslessly; untagged single photons survive with
    probability ``eta``.  ``breach`` is true when the multi-photon supply
    covers the expected single-photon throughput, so Eve can replace the
    whole channel with tagged pulses.
    """
    n = len(records)
    tagged = int(np.count_nonzero(records.tagged))
    singles = int(np.count_nonzero(~records.tagged & (records.realized_n == 1)))
    arrivals = tagged + eta * singles
    multi_frac = int(np.count_nonzero(records.realized_n >= 2)) / n if n else 0.0
    throughput = eta * singles / n if n else 0.0
    return TaggedFraction(
        fraction=tagged / arrivals if arrivals > 0 else 0.0,
        n_tagged=tagged,
        expected_arrivals=arrivals,
        multi_photon_fraction=multi_frac,
        single_throughput=throughput,
        breach=multi_frac >= throughput,
    )


def analytic_tagged_fraction(s: float, eta: float) -> float:
    multi = float(poisson_multi(s))
    single = s * math.exp(-s)
    denom = multi + eta * single
    return multi / denom if denom > 0 else 0.0


def pns_breach_condition(s: float, eta: float) -> bool:
    """Whether P(n >= 2) >= eta P(n = 1) for a Poisson(s) source."""
    return float(poisson_multi(s)) >= eta * s * math.exp(-s)
