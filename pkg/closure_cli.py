#!/usr/bin/env python3
"""
Hyperbolic closure toolkit

Generate training data with the kinetic solver, train structure-preserving
closure networks, and benchmark the closed moment systems.

Usage:
    python closure_cli.py gen-data --count 100 --N 6 --out data
    python closure_cli.py train --data data/manifest.json --out models/ml_N6.json
    python closure_cli.py bench --pn --model "models/ml_N{N}.json" --benchmark gaussian --N-list 2 4 6 --out runs
"""

import sys

from closure_modules.bench_cli import main


if __name__ == '__main__':
    sys.exit(main())
