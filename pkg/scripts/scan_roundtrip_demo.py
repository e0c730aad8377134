#!/usr/bin/env python3
"""End-to-end demo: synthesize a wedge-device scan, then recover the
roughness and additional losses from it.

    python3 scripts/scan_roundtrip_demo.py [seed]
"""

import sys

from scmkit.modelfit import (
    fit_envelopes,
    fit_loss_model,
    samples_from_maps,
    segment_statistics,
)
from scmkit.optics import MirrorSet, OpticalConstants
from scmkit.synth import (
    ScanConfig,
    make_wedge_heightmap,
    sample_roughness_field,
    synthesize_finesse_map,
)

TRUE_SIGMA_NM = 0.9
TRUE_LOSS_ADD_PPM = 610.0


def main():
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    constants = OpticalConstants()
    mirrors = MirrorSet()
    wedge = make_wedge_heightmap((70.0, 20.0), 0.2, 2.3, 0.7)
    rough = sample_roughness_field((70.0, 20.0), 0.2, TRUE_SIGMA_NM, 0.2,
                                   seed=seed)
    fmap = synthesize_finesse_map(wedge, rough, mirrors, constants,
                                  TRUE_LOSS_ADD_PPM,
                                  ScanConfig(samples_per_trace=2000,
                                             seed=seed))
    t_nm, finesse = samples_from_maps(wedge, fmap)
    print(f"scan: {t_nm.size} valid cells, finesse "
          f"{finesse.min():.0f} .. {finesse.max():.0f}")

    report = fit_loss_model(t_nm, finesse, mirrors, constants)
    print(f"loss-model fit (truth sigma={TRUE_SIGMA_NM} nm, "
          f"L_add={TRUE_LOSS_ADD_PPM} ppm):")
    for name, value in report.params.items():
        print(f"  {name:24s} {value:10.3f} +- {report.stderr[name]:.3f}")

    segments = segment_statistics(t_nm, finesse)
    envelopes = fit_envelopes(segments, mirrors, constants)
    for side in ("upper", "lower"):
        sigma = envelopes[side].params["sigma_nm"]
        print(f"{side} envelope roughness: {sigma:.3f} nm")


if __name__ == "__main__":
    main()
