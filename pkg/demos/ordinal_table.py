"""Print L1(rho) to the DVM reference for each order and Knudsen number.

usage: python3 ordinal_table.py [hme_cells] [dvm_cells]
"""

import sys
import time

from relmoment.cli import l1_distance
from relmoment.dvm_reference import dvm_run, macroscopic
from relmoment.hme_solver import SolverConfig, run

ORDERS = (1, 3, 5, 9)


def main():
    cells = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    dvm_cells = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
    print("kn,m,l1_rho,seconds")
    for kn in (0.05, 0.5):
        s = dvm_run(SolverConfig(cells=dvm_cells, kn=kn))[0][-1]
        ref = dict(macroscopic(s.grid, s.f), x=s.x)
        for m in ORDERS:
            t0 = time.perf_counter()
            prof = run(SolverConfig(m=m, cells=cells, kn=kn))[0][-1].primitives()
            d = l1_distance(prof, ref, "rho", (-1.5, 1.5))
            print(f"{kn},{m},{d:.6g},{time.perf_counter() - t0:.1f}", flush=True)


if __name__ == "__main__":
    main()
