"""Closed-form key-rate, leakage and sampling-bound formulas.

These are formula evaluations, not security statements.  Every
:class:`KeyRateReport` carries caveat strings saying which assumptions the
number rests on, and negative rates are reported as they come out.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

CAVEAT_CHANNEL_MI = (
    "channel-MI formula: I(A;E) is a constant-channel quantity, not the mutual "
    "information I_E(K) Eve holds on the key; meaningful only for passive attacks"
)
CAVEAT_ASYMPTOTIC = "asymptotic in key length; no finite-size correction"
CAVEAT_CSS = (
    "derived for CSS-code error correction and privacy amplification, which is "
    "non-constructive and not the LDPC/hashing used in practice"
)
CAVEAT_SIDE_INFO = "side information from public error-correction and hashing messages not accounted for"
CAVEAT_NO_LEVEL = "rate quoted without an accompanying security level"
CAVEAT_NO_KEY = "rate <= 0: no key can be extracted"
CAVEAT_P1_ORDER = "p1 taken as equality at the exponent level (stated only up to order)"

IDEAL_RATE_CAVEATS = (CAVEAT_CSS, CAVEAT_ASYMPTOTIC, CAVEAT_SIDE_INFO, CAVEAT_NO_LEVEL)


@dataclass(frozen=True)
class KeyRateReport:
    rate: float
    qber: Optional[float] = None
    leak_ec: Optional[float] = None
    log2_ie_bound: Optional[float] = None
    log2_p1_bound: Optional[float] = None
    caveats: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.qber is not None and not 0.0 <= self.qber <= 0.5:
            raise ValueError(f"qber must be in [0, 0.5], got {self.qber}")
        if self.leak_ec is not None and self.leak_ec < 0:
            raise ValueError("leak_ec must be >= 0")
        if self.log2_p1_bound is not None and self.log2_p1_bound > 0:
            raise ValueError("p1 bound must be a probability")


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must be in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def key_rate_ideal(qber: float) -> float:
    """1 - 2 h(QBER), bits per channel use. Negative values are returned as-is."""
    if not 0.0 <= qber <= 0.5:
        raise ValueError(f"qber must be in [0, 0.5], got {qber}")
    return 1.0 - 2.0 * binary_entropy(qber)


def channel_rate(i_ab: float, i_ae: float) -> KeyRateReport:
    """I(A;B) - I(A;E) with the passive-attack caveat attached."""
    if i_ab < 0 or i_ae < 0:
        raise ValueError("mutual informations must be >= 0")
    rate = i_ab - i_ae
    caveats = [CAVEAT_CHANNEL_MI, CAVEAT_ASYMPTOTIC, CAVEAT_SIDE_INFO]
    if rate <= 0:
        caveats.append(CAVEAT_NO_KEY)
    return KeyRateReport(rate=rate, caveats=tuple(caveats))


def leak_ec(f_factor: float, n: float, qber: float) -> float:
    """Error-correction leakage f * n * h(QBER) in bits.

    ``f_factor`` outside [1, 2] triggers a warning but is still used.
    """
    if not 1.0 <= f_factor <= 2.0:
        warnings.warn(
            f"f_factor={f_factor} outside the customary range [1, 2]", RuntimeWarning, stacklevel=2
        )
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return f_factor * n * binary_entropy(qber)


def ie_p1_profile(lam: float, n: float) -> tuple[float, float]:
    """log2 of Eve's information and of her whole-key guessing probability.

    ``I_E = 2^-(lam n - log2 n)`` and ``p1 ~ 2^-(lam n)``; both are returned
    as base-2 logarithms so large ``n`` does not underflow.
    """
    if lam <= 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return -(lam * n - math.log2(n)), -lam * n


def ideal_rate_report(
    qber: float,
    n: Optional[float] = None,
    f_factor: float = 1.2,
    lam: Optional[float] = None,
) -> KeyRateReport:
    rate = key_rate_ideal(qber)
    leak = leak_ec(f_factor, n, qber) if n is not None else None
    log_ie = log_p1 = None
    caveats = list(IDEAL_RATE_CAVEATS)
    if lam is not None and n is not None:
        log_ie, log_p1 = ie_p1_profile(lam, n)
        caveats.append(CAVEAT_P1_ORDER)
    if rate <= 0:
        caveats.append(CAVEAT_NO_KEY)
    return KeyRateReport(rate, qber, leak, log_ie, log_p1, tuple(caveats))


def counting_bounds(n_total: int, n_checked: int, delta: float) -> tuple[float, float]:
    """log2 tail-bound exponents for estimating an error rate from a random sample.

    The classical exponent is Serfling's bound for sampling without
    replacement, ``P(sample mean - population mean >= delta) <=
    exp(-2 n delta^2 / (1 - (n - 1)/N))``, expressed in base 2.  The quantum
    exponent is half of it.
    """
    if not 0 < n_checked < n_total:
        raise ValueError(f"need 0 < n_checked < n_total, got {n_checked}, {n_total}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    correction = 1.0 - (n_checked - 1) / n_total
    classical = -2.0 * n_checked * delta**2 / correction * math.log2(math.e)
    return classical, classical / 2.0
