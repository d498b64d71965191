"""Baseline experiment: validate, simulate, and decompose the linear fixture.

Usage: python scripts/run_baseline.py [--out DIR]
"""

import argparse
import sys

from kwavelab.cli import main as kwavelab_main

CONFIG = "configs/linear.cfg"

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/baseline")
    args = parser.parse_args()
    for command in ("validate", "simulate", "decompose"):
        code = kwavelab_main([command, "--config", CONFIG, "--out", args.out])
        if code != 0:
            sys.exit(code)
    print(f"baseline artifacts in {args.out}")
