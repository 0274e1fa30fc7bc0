#!/usr/bin/env python3
"""External model for `sensrank --model external`: ordinary least squares.

Reads "#fit" or "#predict" on the first stdin line, then header-less CSV rows.
On fit the last column is the target and the coefficients are stored next to
this script; on predict one prediction per row is written to stdout.
"""
import os
import sys

import numpy as np

STATE = os.path.join(os.path.dirname(os.path.abspath(__file__)), ".mean_model_state.npy")


def main():
    mode = sys.stdin.readline().strip()
    rows = np.loadtxt(sys.stdin, delimiter=",", ndmin=2)
    if mode == "#fit":
        x, y = rows[:, :-1], rows[:, -1]
        design = np.hstack([np.ones((len(x), 1)), x])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        np.save(STATE, coef)
    elif mode == "#predict":
        coef = np.load(STATE)
        for v in coef[0] + rows @ coef[1:]:
            sys.stdout.write(repr(float(v)) + "\n")
    else:
        sys.exit(f"unknown mode {mode!r}")


if __name__ == "__main__":
    main()
