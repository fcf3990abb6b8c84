"""
Decoy levels against photon-number splitting
============================================

A naive PNS attacker keeps one photon of each multi-photon pulse and hides
the resulting loss by blocking singles.  Multi-photon pulses are far more
common at the signal level than at the decoy level, so the per-level
yields give her away.  Splitting the coherent amplitude instead lets her
guess the level from her own arm.
"""
import math

import numpy as np

from qkdlab.decoy import (
    SCHEME_S05,
    decoy_yield_check,
    discriminate_levels_poisson,
    emit_pulses,
    helstrom_error,
    naive_pns_forward_probs,
    transmit_honest,
    transmit_naive_pns,
)

rng = np.random.default_rng(5)
eta = 0.1
pulses = emit_pulses(SCHEME_S05, 100_000, rng)

honest = decoy_yield_check(transmit_honest(pulses, eta, rng), eta)
attacked = decoy_yield_check(transmit_naive_pns(pulses, SCHEME_S05, eta, rng), eta)
print("levels        ", honest.s_levels)
print("honest yields ", honest.yields.round(5), "alarm", honest.alarm)
print("PNS yields    ", attacked.yields.round(5), "alarm", attacked.alarm)
print("forwarding probabilities (multi, single):", naive_pns_forward_probs(SCHEME_S05, eta))

# level discrimination from a 90% split of S=1 vs vacuum
res = discriminate_levels_poisson(0.9, 1.0, 0.0, (0.5, 0.5), 200_000, rng)
print(f"photon counting: {res.success:.4f} (exact {res.analytic:.4f})")
print(f"Helstrom limit : {1 - helstrom_error(math.sqrt(0.9), 0.0):.4f}")
