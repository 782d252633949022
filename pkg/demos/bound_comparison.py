"""Decomposition-based bound versus a plain stability bound at high SNR.

Runs the registered preset through the harness and prints the report. The
variance run stays small (B) while the standard run carries the large
signal (B'), which is what separates the two bounds.

    python demos/bound_comparison.py
"""

from riskdecomp.harness import ExperimentConfig, emit_report, run_experiment

res = run_experiment(ExperimentConfig(preset="bound-compare-highsnr", trials=3))
print(emit_report([res.table]))
