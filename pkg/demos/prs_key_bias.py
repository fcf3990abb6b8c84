"""
Probabilistic resend skews the sifted key
=========================================

Eve attacks 8% of the qubits, which costs her a 2% QBER, deletes the ones
she read as 1 and forwards the rest over a loss-free line.  On a 10%
transmittance channel her forwarded qubits make up almost a third of the
sifted key, and they are mostly zeros.
"""
import numpy as np

from qkdlab.bb84 import (
    BREIDBART_ERROR,
    Bb84Config,
    DeletionPolicy,
    expected_session,
    key_bias_report,
    max_attack_fraction,
    run_session,
)

rng = np.random.default_rng(11)
f = max_attack_fraction(0.02, BREIDBART_ERROR)

for policy in (DeletionPolicy.DELETE_BIT_ONE, DeletionPolicy.NONE):
    cfg = Bb84Config(n_sent=400_000, eta=0.1, attack_fraction=f, deletion_policy=policy,
                     qber_threshold=1.0)
    exp = expected_session(cfg)
    rep = key_bias_report([run_session(cfg, rng)])
    print(f"{policy.value:>15}: qber {exp.qber:.4f}  zeros {rep.zero_fraction:.4f} "
          f"(expected {exp.zero_fraction:.4f})  bias {rep.bias_sigmas:+.1f} sigma  "
          f"arrivals {exp.arrival_rate:.3f}")

# with rate matching Eve also thins the clean qubits so Babe sees the usual 10%
cfg = Bb84Config(n_sent=400_000, eta=0.1, attack_fraction=f,
                 deletion_policy=DeletionPolicy.DELETE_BIT_ONE, match_arrival_rate=True)
tr = run_session(cfg, rng)
print("rate matched: arrival", tr.arrived.mean(), " zeros", key_bias_report([tr]).zero_fraction)
