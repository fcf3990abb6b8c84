"""
Guessing BB84 bits from one measurement
=======================================

Eve gets one measurement on a random BB84 state.  The best basis sits half
way between the two BB84 bases and guesses right about 85% of the time.
Both of its outcomes are equally reliable, so being allowed to discard
some outcomes only helps when the ensemble is lopsided.
"""
import math

import numpy as np

from qkdlab.quantum_core import (
    BREIDBART_BASIS,
    Z_BASIS,
    bb84_angles,
    bb84_ensemble,
    bb84_state,
    born_probability,
    measure_angles,
    optimal_deletion_advantage,
)

states, bits, priors = bb84_ensemble()

# probability that outcome == bit, per state
for state, bit in zip(states, bits):
    pz = born_probability(state, Z_BASIS)[bit]
    pb = born_probability(state, BREIDBART_BASIS)[bit]
    print(f"{state.label:>6}  Z basis {pz:.3f}   pi/8 basis {pb:.3f}")
print("cos^2(pi/8) =", math.cos(math.pi / 8) ** 2)

# Monte Carlo over random BB84 states
rng = np.random.default_rng(1)
b, basis = rng.integers(0, 2, 200_000), rng.integers(0, 2, 200_000)
out, _ = measure_angles(bb84_angles(b, basis), BREIDBART_BASIS.angle, rng)
print("simulated success:", np.mean(out == b))

# a deletion budget changes nothing on the uniform ensemble...
for budget in (0.0, 0.5):
    res = optimal_deletion_advantage(states, bits, priors, budget, basis_grid=360)
    print(f"BB84, budget {budget:.1f}: success {res.success_prob:.4f}  kept {res.kept_fraction:.2f}")

# ...but on a lopsided one Eve can discard the ambiguous outcome
lop = [bb84_state(0, "Z"), bb84_state(0, "X"), bb84_state(1, "Z")]
for budget in (0.0, 0.4):
    res = optimal_deletion_advantage(lop, [0, 0, 1], [0.4, 0.4, 0.2], budget, basis_grid=360)
    print(f"lopsided, budget {budget:.1f}: success {res.success_prob:.4f}  ({res.best_rule})")
