"""Print the sign changes and crossing locations of the field-1 nonlinearity indicator.

usage: python3 indicator_survey.py [zeta_lo] [zeta_hi] [points]
"""

import sys

import numpy as np

from relmoment.analysis import char_field_survey


def main():
    lo = float(sys.argv[1]) if len(sys.argv) > 1 else 0.05
    hi = float(sys.argv[2]) if len(sys.argv) > 2 else 10.0
    n = int(sys.argv[3]) if len(sys.argv) > 3 else 400
    zetas = np.linspace(lo, hi, n)
    print("m,crossings")
    for m in range(1, 10):
        vals = char_field_survey(m, zetas)
        idx = np.flatnonzero(np.sign(vals[1:]) != np.sign(vals[:-1]))
        # linear interpolation between bracketing grid points
        cross = [zetas[i] - vals[i] * (zetas[i + 1] - zetas[i]) / (vals[i + 1] - vals[i]) for i in idx]
        print(f"{m},{' '.join(f'{c:.4f}' for c in cross)}")


if __name__ == "__main__":
    main()
