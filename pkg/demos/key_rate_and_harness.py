"""
Key-rate formulas and the scenario harness
==========================================

The harness runs any scenario from a JSON config with a fixed seed; the
same config always produces the same report bytes.
"""
from pathlib import Path

from qkdlab.harness import load_config, run_scenario
from qkdlab.harness.report import report_to_csv, report_to_json
from qkdlab.key_rate import counting_bounds, ideal_rate_report

here = Path(__file__).parent

rep = ideal_rate_report(0.02, n=10_000, lam=0.01)
print("R(2%) =", rep.rate, " leak =", rep.leak_ec, " log2 I_E =", rep.log2_ie_bound)
for c in rep.caveats:
    print("  -", c)

print("counting exponents (classical, quantum):", counting_bounds(1000, 200, 0.05))

sweep = run_scenario(load_config(here / "configs" / "key_rate_sweep.json"))
print(report_to_csv(sweep).splitlines()[:4])

cfg = load_config(here / "configs" / "decoy_cbs.json")
a = report_to_json(run_scenario(cfg, workers=1))
b = report_to_json(run_scenario(cfg, workers=4))
print("config hash", cfg.config_hash[:16], " identical across worker counts:", a == b)
