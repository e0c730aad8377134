#!/usr/bin/env python3
"""Regenerate the bundled golden sweep trace.

A noiseless triangular sweep whose mode-spacing-to-linewidth ratio is
exactly 9500, used as a fixed reference for the trace analysis. Run
from the repository root:

    python3 scripts/make_golden_trace.py
"""

import os
import sys

from scmkit.formats import write_trace
from scmkit.synth import ScanConfig, synthesize_trace

GOLDEN_FINESSE = 9500.0


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(__file__), "..", "tests", "data", "golden_trace.csv")
    config = ScanConfig(samples_per_trace=200_000, noise_rms_v=0.0)
    trace = synthesize_trace(GOLDEN_FINESSE, modes_in_sweep=5, config=config)
    os.makedirs(os.path.dirname(out), exist_ok=True)
    write_trace(out, trace)
    print(f"wrote {out} ({os.path.getsize(out)} bytes, "
          f"finesse {GOLDEN_FINESSE:g})")


if __name__ == "__main__":
    main()
