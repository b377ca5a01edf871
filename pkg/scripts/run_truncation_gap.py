#!/usr/bin/env python3
"""Truncation gap demo: fixed m=2 versus the growing schedule m_n = floor(n^0.25).

With m fixed the site-level second moment of (zeta - Z) stabilises at the
strictly positive value (p_2(x) + p(x)) * int K^2 = 0.42139 at x=0 for the
geometric model; re-run with --set gap.mode=growing to watch it collapse.
"""

import pathlib
import sys

from fieldkde.cli import main

HERE = pathlib.Path(__file__).resolve().parent

if __name__ == "__main__":
    sys.exit(
        main(
            [
                "fixed-m-gap",
                "--config",
                str(HERE.parent / "configs" / "geometric_truncation_gap.json"),
                *sys.argv[1:],
            ]
        )
    )
