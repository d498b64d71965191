"""Attractor study on the 3-d cubic fixture: feasibility scan, absorbing-set
verification with cloud dumps, then the delta-sweep against the limit problem.

Usage: python scripts/run_attractor_study.py [--out DIR] [--threads N]
"""

import argparse
import sys

from kwavelab.cli import main as kwavelab_main

if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="out/attractor_study")
    parser.add_argument("--threads", type=int, default=1)
    args = parser.parse_args()
    stages = [
        ("feasibility", "configs/cubic3d.cfg"),
        ("pullback", "configs/cubic3d.cfg"),
        ("semicontinuity", "configs/sweep.cfg"),
    ]
    for command, config in stages:
        code = kwavelab_main([command, "--config", config, "--out", args.out,
                              "--threads", str(args.threads)])
        if code != 0:
            sys.exit(code)
    print(f"attractor study artifacts in {args.out}")
