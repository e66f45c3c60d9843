#!/usr/bin/env python3
"""Write the committed Stark-table fixture for the 87Rb 59D3/2 Forster pair.

The atomic-structure calculator is not a build dependency, so the fixture is a
smooth surrogate: C3 grows quadratically with the field and the energy defect
follows a quadratic Stark shift, pinned with a monotone PCHIP interpolant to the
published resonance field and crossover radii. Regenerate with

    python3 tools/make_surrogate_table.py > data/stark_rb87_59D32_bz0.csv
"""
import sys

import numpy as np
from scipy.interpolate import PchipInterpolator

E_RES = 29.787          # mV/cm
C3_ZERO = 2540.0        # MHz um^3
C3_CURVATURE = 0.1
# (field mV/cm, crossover radius um, sign of the defect)
CROSSOVER_ANCHORS = [(0.0, 6.68, +1), (28.2, 14.15, +1), (29.0, 52.95, +1), (34.4, 9.76, -1)]


def c3(field):
    return C3_ZERO * (1.0 + C3_CURVATURE * (field / E_RES) ** 2)


def main():
    delta_zero = c3(0.0) / CROSSOVER_ANCHORS[0][1] ** 3

    def quadratic_stark(field):
        return delta_zero * (1.0 - (field / E_RES) ** 2)

    anchors = {e: s * c3(e) / rc ** 3 for e, rc, s in CROSSOVER_ANCHORS}
    anchors[E_RES] = 0.0
    for e in (10.0, 20.0, 40.0, 50.0):
        anchors[e] = quadratic_stark(e)
    xs = np.array(sorted(anchors))
    delta = PchipInterpolator(xs, np.array([anchors[x] for x in xs]))

    grid = np.round(np.arange(0.0, 50.0 + 1e-9, 0.1), 10)
    out = sys.stdout
    out.write("# species=Rb87\n")
    out.write("# pair_state=59D3/2,59D3/2\n")
    out.write("# coupled_pair=61P1/2,57F5/2\n")
    out.write("# magnetic_field_G=0\n")
    out.write("# source=surrogate (tools/make_surrogate_table.py)\n")
    out.write("E_mVcm,delta_MHz,C3_MHz_um3\n")
    for e in grid:
        out.write(f"{e:.1f},{float(delta(e)):.12g},{c3(e):.12g}\n")


if __name__ == "__main__":
    main()
