#!/usr/bin/env python3
"""Print the loss budget, outcoupling and Purcell estimate across the
air-like .. diamond-like thickness range for a given roughness.

    python3 scripts/loss_budget_report.py [sigma_nm] [loss_add_ppm]
"""

import sys

import numpy as np

from scmkit.optics import (
    DiamondSlab,
    FiberTip,
    HybridGeometry,
    MirrorSet,
    OpticalConstants,
    effective_losses,
    mode_thickness_nm,
    ModeIndex,
    outcoupling_efficiency,
    purcell_estimate,
)


def main():
    sigma_nm = float(sys.argv[1]) if len(sys.argv) > 1 else 0.6
    loss_add = float(sys.argv[2]) if len(sys.argv) > 2 else 390.0
    constants = OpticalConstants()
    mirrors = MirrorSet()
    fiber = FiberTip()

    t_air = mode_thickness_nm(ModeIndex(q=19, kind="air_like"), constants)
    t_dia = mode_thickness_nm(ModeIndex(q=19, kind="diamond_like"), constants)
    print(f"sigma = {sigma_nm} nm, additional losses = {loss_add} ppm")
    print(f"{'thickness_nm':>13s} {'L_eff_ppm':>10s} {'finesse':>8s} "
          f"{'outcoupling':>11s} {'purcell':>8s}")
    for t_d in np.linspace(t_air, t_dia, 9):
        slab = DiamondSlab(thickness_nm=t_d, roughness_nm=sigma_nm)
        budget = effective_losses(slab, mirrors, constants, loss_add)
        eta = outcoupling_efficiency(budget, mirrors)
        geometry = HybridGeometry(air_gap_nm=2500.0, diamond_thickness_nm=t_d)
        fp = purcell_estimate(budget.finesse, geometry, fiber, constants)
        print(f"{t_d:13.1f} {budget.loss_effective_ppm:10.1f} "
              f"{budget.finesse:8.0f} {eta:11.2%} {fp:8.1f}")


if __name__ == "__main__":
    main()
