#!/usr/bin/env python3
"""Reproduce the sample-size error curve on the double-moon task.

Writes <out>.csv with one row per (size, trial), a .summary.csv with
per-size means, and an SVG with the error curve between the 0.5/sqrt(n)
and 8/sqrt(n) reference curves. The full paper-scale grid (n up to
15000, 100 trials) takes hours; the default here is a coarser grid that
shows the same shape in minutes.
"""

import sys

from aosr.cli import main

DEFAULTS = [
    "sweep",
    "--sizes", "100,500,900,2000,5000,9000",
    "--trials", "5",
    "--seed", "0",
    "--out", "error_curve.csv",
]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS if len(sys.argv) == 1 else ["sweep"] + sys.argv[1:]))
