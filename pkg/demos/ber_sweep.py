"""
A small Monte Carlo sweep
=========================

Runs every detector over three SNR points and writes the report files the
command line tool produces.  Re-running with more workers gives the same
table.
"""

import tempfile
from pathlib import Path

from rc_symdet.harness import desk_profile, emit_report, run_sweep

cfg = desk_profile(trials=5, sweep_values=(10.0, 20.0, 30.0), master_seed=7)
records, manifest, traces = run_sweep(cfg, workers=1)

for r in records:
    print(f"{r.detector:>10s}  SNR {r.sweep_value:4.0f} dB  BER {r.ber:.4f}")
print(f"training overhead {manifest.notes['overhead_percent']} %, {manifest.wall_clock_s:.1f} s")

out = Path(tempfile.mkdtemp()) / "sweep"
for path in emit_report(records, manifest, out, traces, gnuplot=True):
    print("wrote", path)
