#!/usr/bin/env python3
"""Check the empirical auxiliary risk against its Monte Carlo target.

Runs the convergence experiment on the analytic 1-D fixture with the
true density ratio supplied, writes the per-trial gaps and the fitted
log-log slope (expected around -0.5), and renders the median-gap curve.
"""

import sys

from aosr.cli import main

DEFAULTS = [
    "verify",
    "--experiment", "theorem3",
    "--sizes", "100,400,1600,6400",
    "--trials", "10",
    "--ratio-source", "true",
    "--seed", "7",
    "--out", "rate_check.csv",
]

if __name__ == "__main__":
    sys.exit(main(DEFAULTS if len(sys.argv) == 1 else ["verify"] + sys.argv[1:]))
