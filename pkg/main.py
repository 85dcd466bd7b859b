#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
tiltbench - exponential tilt estimation for outcomes missing not at random

Entry point for the command line. Subcommands:
    simulate        Monte Carlo grid over the Gaussian designs
    estimate        sample-split estimate on a CSV dataset
    transfer-bench  subpopulation-shift benchmark and MCV check
    el-compare      exponentiated gradient against empirical likelihood

Example:
    python main.py estimate --data data.csv --tau y --method dr --out out/est

Needs Python 3.10+ with numpy, scipy and pandas.
"""

import importlib.util
import os
import sys

# the src package is imported relative to this file
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# (import name, pip name)
REQUIRED_PACKAGES = (
    ("numpy", "numpy"),
    ("scipy", "scipy"),
    ("pandas", "pandas"),
)


def check_dependencies() -> list[str]:
    """pip names of required packages that cannot be imported."""
    return [pip_name for module, pip_name in REQUIRED_PACKAGES
            if importlib.util.find_spec(module) is None]


def main(argv: list[str] | None = None) -> int:
    missing = check_dependencies()
    if missing:
        print(f"ERROR: missing packages: {', '.join(missing)}", file=sys.stderr)
        print(f"Install with: pip install {' '.join(missing)}", file=sys.stderr)
        return 1

    from src.cli.commands import run
    return run(argv)


if __name__ == "__main__":
    sys.exit(main())
