"""Gaussian quadrature channel models for coherent-state CV-QKD.

One real quadrature ``m ~ N(0, V)`` is modelled per channel use, in
shot-noise units.  Two scenarios are provided:

* passive beam-splitter tap: ``m_B = sqrt(T) m + n_B`` and
  ``m_E = sqrt(1 - T) m + n_E`` with unit homodyne noises;
* heterodyne-resend near the transmitter: ``m_E = m + n_E`` with
  ``var n_E = 2`` and ``m_B = sqrt(T) m_E + n_B``.

Adam's own record is ``m_A = m + n_A``.  All sampling functions accept a
scalar or an array for ``m`` and broadcast.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import RngStream

#: Adam's default uncertainty variance as a fraction of the modulation variance.
DEFAULT_NA_FRACTION = 0.01


class Scenario(enum.Enum):
    PASSIVE = "Passive"
    HETERODYNE_RESEND = "HeterodyneResend"


@dataclass(frozen=True)
class CvChannelParams:
    """Channel and noise parameters (shot-noise units).

    ``var_nA`` left as ``None`` resolves to ``0.01 * V``.
    """

    T: float
    V: float
    var_nA: Optional[float] = None
    var_nB: float = 1.0
    var_nE_passive: float = 1.0
    var_nE_het: float = 2.0
    delta_T: float = 0.0

    def __post_init__(self) -> None:
        if self.var_nA is None:
            object.__setattr__(self, "var_nA", DEFAULT_NA_FRACTION * self.V)
        if not 0.0 < self.T <= 1.0:
            raise ValueError(f"T must be in (0, 1], got {self.T}")
        if not self.V > 0.0:
            raise ValueError(f"V must be > 0, got {self.V}")
        for name in ("var_nA", "var_nB", "var_nE_passive", "var_nE_het"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.delta_T < 0.0 or self.T - self.delta_T <= 0.0:
            raise ValueError(
                f"delta_T must satisfy 0 <= delta_T < T, got delta_T={self.delta_T}, T={self.T}"
            )

    @property
    def t(self) -> float:
        """Real amplitude transmission, sqrt(T)."""
        return math.sqrt(self.T)


@dataclass(frozen=True)
class QuadratureTriple:
    m: np.ndarray | float
    m_A: np.ndarray | float
    m_B: np.ndarray | float
    m_E: np.ndarray | float
    scenario: Scenario


def _noise(rng: RngStream, var: float, shape) -> np.ndarray:
    if var == 0.0:
        return np.zeros(shape)
    return rng.normal(0.0, math.sqrt(var), shape)


def adam_estimate(m, params: CvChannelParams, rng: RngStream):
    """Adam's noisy record of his own modulation, ``m + n_A``."""
    m = np.asarray(m, dtype=float)
    return m + _noise(rng, params.var_nA, m.shape)


def sample_passive(m, params: CvChannelParams, rng: RngStream) -> QuadratureTriple:
    m = np.asarray(m, dtype=float)
    m_A = adam_estimate(m, params, rng)
    m_B = params.t * m + _noise(rng, params.var_nB, m.shape)
    m_E = math.sqrt(1.0 - params.T) * m + _noise(rng, params.var_nE_passive, m.shape)
    return QuadratureTriple(m, m_A, m_B, m_E, Scenario.PASSIVE)


def sample_heterodyne_resend(m, params: CvChannelParams, rng: RngStream) -> QuadratureTriple:
    m = np.asarray(m, dtype=float)
    m_A = adam_estimate(m, params, rng)
    m_E = m + _noise(rng, params.var_nE_het, m.shape)
    m_B = params.t * m_E + _noise(rng, params.var_nB, m.shape)
    return QuadratureTriple(m, m_A, m_B, m_E, Scenario.HETERODYNE_RESEND)


def sample(scenario: Scenario, m, params: CvChannelParams, rng: RngStream) -> QuadratureTriple:
    if Scenario(scenario) is Scenario.PASSIVE:
        return sample_passive(m, params, rng)
    return sample_heterodyne_resend(m, params, rng)


def gaussian_mutual_info(signal_variance: float, noise_variance: float) -> float:
    """Capacity of an additive Gaussian channel, in bits per use."""
    if noise_variance < 0 or signal_variance < 0:
        raise ValueError("variances must be non-negative")
    if noise_variance == 0:
        raise ValueError("noise_variance = 0 gives infinite information")
    return 0.5 * math.log2(1.0 + signal_variance / noise_variance)


# --- second-order statistics ---------------------------------------------------

@dataclass(frozen=True)
class Moments:
    """Closed-form covariance matrix of ``(m, m_A, m_B, m_E)``."""

    names: tuple[str, ...]
    cov: np.ndarray

    def var(self, a: str) -> float:
        i = self.names.index(a)
        return float(self.cov[i, i])

    def covariance(self, a: str, b: str) -> float:
        return float(self.cov[self.names.index(a), self.names.index(b)])


def analytic_moments(params: CvChannelParams, scenario: Scenario, T: float | None = None) -> Moments:
    """Covariances implied by the linear channel equations.

    ``T`` overrides ``params.T`` (used for the loss-uncertainty null model).
    """
    T = params.T if T is None else T
    t = math.sqrt(T)
    V = params.V
    # rows: coefficients of (m, n_A, n_B, n_E) in each observable
    if Scenario(scenario) is Scenario.PASSIVE:
        A = np.array([
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [t, 0.0, 1.0, 0.0],
            [math.sqrt(1.0 - T), 0.0, 0.0, 1.0],
        ])
        var_nE = params.var_nE_passive
    else:
        A = np.array([
            [1.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0],
            [t, 0.0, 1.0, t],
            [1.0, 0.0, 0.0, 1.0],
        ])
        var_nE = params.var_nE_het
    source = np.diag([V, params.var_nA, params.var_nB, var_nE])
    return Moments(("m", "m_A", "m_B", "m_E"), A @ source @ A.T)


def linear_mmse(moments: Moments, target: str, observed: str) -> float:
    """Mean-square error of the best linear estimate of ``target`` from ``observed``."""
    var_obs = moments.var(observed)
    if var_obs == 0.0:
        return moments.var(target)
    return moments.var(target) - moments.covariance(target, observed) ** 2 / var_obs


def correlation_mutual_info(moments: Moments, a: str, b: str) -> float:
    """Mutual information of two jointly Gaussian variables, ``-1/2 log2(1 - rho^2)``."""
    va, vb = moments.var(a), moments.var(b)
    if va == 0.0 or vb == 0.0:
        return 0.0
    rho2 = moments.covariance(a, b) ** 2 / (va * vb)
    if rho2 >= 1.0:
        return math.inf
    return -0.5 * math.log2(1.0 - rho2)


def channel_mutual_infos(params: CvChannelParams, scenario: Scenario) -> dict[str, float]:
    """I(A;B), I(A;E) taking Adam's variable as the channel input ``m``, and I(B;E)."""
    mom = analytic_moments(params, scenario)
    V = params.V
    noise_B = mom.var("m_B") - mom.covariance("m", "m_B") ** 2 / V
    noise_E = mom.var("m_E") - mom.covariance("m", "m_E") ** 2 / V
    gain_B = mom.covariance("m", "m_B") ** 2 / V
    gain_E = mom.covariance("m", "m_E") ** 2 / V
    return {
        "I_AB": gaussian_mutual_info(gain_B, noise_B) if noise_B > 0 else math.inf,
        "I_AE": gaussian_mutual_info(gain_E, noise_E) if noise_E > 0 else math.inf,
        "I_BE": correlation_mutual_info(mom, "m_B", "m_E"),
    }


# --- reconciliation comparison ----------------------------------------------

_MSE_PAIRS = {
    "mse_B_of_m": ("m", "m_B"),
    "mse_E_of_m": ("m", "m_E"),
    "mse_A_of_mB": ("m_B", "m_A"),
    "mse_E_of_mB": ("m_B", "m_E"),
}


@dataclass(frozen=True)
class ReconciliationAdvantageReport:
    """Estimation errors and channel informations for one scenario.

    ``mse_*`` are Monte Carlo means; ``analytic`` and ``standard_errors``
    hold the closed-form values and the Monte Carlo standard errors keyed by
    the same names.
    """

    scenario: Scenario
    mse_B_of_m: float
    mse_E_of_m: float
    mse_A_of_mB: float
    mse_E_of_mB: float
    I_AB: float
    I_AE: float
    I_BE: float
    n_trials: int
    analytic: dict = field(default_factory=dict)
    standard_errors: dict = field(default_factory=dict)

    def sigmas_off(self, name: str) -> float:
        se = self.standard_errors[name]
        diff = getattr(self, name) - self.analytic[name]
        return 0.0 if diff == 0.0 else (diff / se if se > 0 else math.inf)


def squared_errors(triple: QuadratureTriple, params: CvChannelParams) -> dict[str, np.ndarray]:
    """Per-sample squared errors of the optimal linear estimators.

    Estimator gains come from the closed-form moments, so the sample means
    are unbiased estimates of the linear MMSE.
    """
    mom = analytic_moments(params, triple.scenario)
    values = {"m": triple.m, "m_A": triple.m_A, "m_B": triple.m_B, "m_E": triple.m_E}
    out = {}
    for name, (target, observed) in _MSE_PAIRS.items():
        var_obs = mom.var(observed)
        gain = mom.covariance(target, observed) / var_obs if var_obs > 0 else 0.0
        out[name] = (np.asarray(values[target]) - gain * np.asarray(values[observed])) ** 2
    return out


def analytic_mses(params: CvChannelParams, scenario: Scenario) -> dict[str, float]:
    mom = analytic_moments(params, scenario)
    return {name: linear_mmse(mom, t, o) for name, (t, o) in _MSE_PAIRS.items()}


def reconciliation_advantage(
    params: CvChannelParams,
    scenario: Scenario,
    n_trials: int,
    rng: RngStream,
) -> ReconciliationAdvantageReport:
    """Compare what Babe, Adam and Eve know about ``m`` and about ``m_B``."""
    if n_trials < 1000:
        raise ValueError(f"n_trials must be >= 1000, got {n_trials}")
    scenario = Scenario(scenario)
    m = rng.normal(0.0, math.sqrt(params.V), n_trials)
    triple = sample(scenario, m, params, rng)
    errs = squared_errors(triple, params)
    means = {k: math.fsum(v) / n_trials for k, v in errs.items()}
    ses = {k: float(np.std(v, ddof=1)) / math.sqrt(n_trials) for k, v in errs.items()}
    infos = channel_mutual_infos(params, scenario)
    return ReconciliationAdvantageReport(
        scenario=scenario,
        n_trials=n_trials,
        analytic=analytic_mses(params, scenario),
        standard_errors=ses,
        **means,
        **infos,
    )


# --- excess-noise detectability -----------------------------------------------

def variance_statistics(
    params: CvChannelParams,
    n_pulses: int,
    n_trials: int,
    hypothesis: str,
    rng: RngStream,
    statistic: str = "variance",
    chunk: int = 256,
) -> np.ndarray:
    """Per-trial test statistics under ``hypothesis`` ("H0" or "H1").

    H0 is the passive channel whose transmittance is redrawn uniformly in
    ``[T - delta_T, T + delta_T]`` for each trial and held fixed within it.
    H1 is heterodyne-resend at the nominal ``T``.

    ``statistic="variance"`` is the sample variance of ``m_B``.
    ``statistic="residual"`` is the sample variance of ``m_B - sqrt(T) m_A``,
    i.e. what the users could compute if they pooled Adam's records.
    """
    if hypothesis not in ("H0", "H1"):
        raise ValueError(f"hypothesis must be 'H0' or 'H1', got {hypothesis!r}")
    if statistic not in ("variance", "residual"):
        raise ValueError(f"unknown statistic {statistic!r}")
    if params.T + params.delta_T > 1.0:
        raise ValueError("T + delta_T must not exceed 1")
    out = np.empty(n_trials)
    for start in range(0, n_trials, chunk):
        k = min(chunk, n_trials - start)
        m = rng.normal(0.0, math.sqrt(params.V), (k, n_pulses))
        if hypothesis == "H0":
            T_trial = rng.uniform(params.T - params.delta_T, params.T + params.delta_T, (k, 1))
            m_A = m + _noise(rng, params.var_nA, m.shape)
            m_B = np.sqrt(T_trial) * m + _noise(rng, params.var_nB, m.shape)
        else:
            triple = sample_heterodyne_resend(m, params, rng)
            m_A, m_B = triple.m_A, triple.m_B
        x = m_B if statistic == "variance" else m_B - params.t * m_A
        out[start:start + k] = np.var(x, axis=1, ddof=1)
    return out


def calibrate_threshold(null_stats: np.ndarray, alpha: float) -> float:
    """Smallest threshold whose empirical false-alarm rate on ``null_stats`` is <= alpha.

    The test rejects when the statistic is strictly greater than the threshold.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    s = np.sort(np.asarray(null_stats))
    n = s.size
    allowed = math.floor(alpha * n)
    return float(s[n - 1 - allowed])


def evaluate_threshold(null_stats, alt_stats, threshold: float) -> tuple[float, float]:
    """(false_alarm, power) of the rule "reject when statistic > threshold"."""
    return (
        float(np.mean(np.asarray(null_stats) > threshold)),
        float(np.mean(np.asarray(alt_stats) > threshold)),
    )


@dataclass(frozen=True)
class ExcessNoiseResult:
    power: float
    false_alarm_achieved: float
    threshold: float
    n_trials: int


def excess_noise_test(
    params: CvChannelParams,
    n_pulses: int,
    alpha: float,
    n_trials: int,
    rng: RngStream,
    statistic: str = "variance",
) -> ExcessNoiseResult:
    """Detection power of a variance check against heterodyne-resend.

    The threshold is calibrated on one batch of H0 trials; the false-alarm
    rate is then measured on a fresh H0 batch and the power on H1 trials.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    if n_pulses < 100:
        raise ValueError(f"n_pulses must be >= 100, got {n_pulses}")
    calib = variance_statistics(params, n_pulses, n_trials, "H0", rng, statistic)
    threshold = calibrate_threshold(calib, alpha)
    null = variance_statistics(params, n_pulses, n_trials, "H0", rng, statistic)
    alt = variance_statistics(params, n_pulses, n_trials, "H1", rng, statistic)
    false_alarm, power = evaluate_threshold(null, alt, threshold)
    return ExcessNoiseResult(power, false_alarm, threshold, n_trials)
