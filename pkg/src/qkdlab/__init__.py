"""Numeric experiments on QKD attack models, channel equations and key-rate formulas.

Modules
-------
quantum_core  qubit states, Born rule, measure-and-resend, deletion explorer
cv_channel    Gaussian quadrature channels, heterodyne-resend, excess-noise test
bb84          single-photon BB84 sessions with partial intercept and deletion
decoy         weak-coherent sources, PNS, coherent splitting, decoy checks
key_rate      key-rate, leakage and sampling-bound formulas
harness       configs, seeded trial execution, reports and the CLI
"""
from .rng import derive_trial_rng

__version__ = "0.1.0"
__all__ = ["derive_trial_rng", "__version__"]
