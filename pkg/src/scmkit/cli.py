"""Command-line surface.

Each command is a thin composition over the library modules: read
inputs, run the corresponding operation, write CSV/JSON outputs plus a
provenance manifest under --out-dir. Exit codes: 0 success, 2 input or
configuration error, 3 fit/analysis failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from .config import ToolConfig
from .formats import (
    FormatError,
    Manifest,
    read_finesse_map,
    read_heightmap,
    read_length_sweep,
    read_ple,
    read_spectra,
    read_trace,
    write_finesse_map,
    write_heightmap,
    write_manifest,
)
from .modelfit import (
    DispersionAmbiguityError,
    fit_clipping,
    fit_dispersion,
    fit_envelopes,
    fit_loss_model,
    samples_from_maps,
    segment_statistics,
)
from .optics import DiamondSlab, StabilityError
from .render import render_heatmap_svg
from .synth import (
    HeightMap,
    RegistrationError,
    make_wedge_heightmap,
    sample_roughness_field,
    synthesize_finesse_map,
)
from .tracefit import (
    FitError,
    ModeDetectionError,
    fit_finesse,
    fit_ple_scan,
    fit_polarization,
    ple_statistics,
    spectral_diffusion_average,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_FIT = 3


def _parse_region(text):
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError("--region expects x0,y0,x1,y1 in um")
    x0, y0, x1, y1 = (float(p) for p in parts)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("--region must have x1 > x0 and y1 > y0")
    return x0, y0, x1, y1


def _crop_maps(height, fmap, region):
    if region is None:
        return height, fmap
    x0, y0, x1, y1 = region
    x = height.x_coords_um()
    y = height.y_coords_um()
    keep_x = (x >= x0) & (x <= x1)
    keep_y = (y >= y0) & (y <= y1)
    if not keep_x.any() or not keep_y.any():
        raise ValueError(f"--region {region} selects no cells")
    origin = (float(x[keep_x][0]), float(y[keep_y][0]))
    sub = np.ix_(keep_y, keep_x)
    height = HeightMap(origin_um=origin, pitch_um=height.pitch_um,
                       grid_um=height.grid_um[sub], frame=height.frame)
    fmap = dataclasses.replace(
        fmap, origin_um=origin, finesse=fmap.finesse[sub],
        linewidth_ghz=fmap.linewidth_ghz[sub],
        splitting_ghz=fmap.splitting_ghz[sub],
        transmission=fmap.transmission[sub], valid=fmap.valid[sub])
    return height, fmap


def _write_report(path, record):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _emit_manifest(out_dir, kind, files, config):
    manifest = Manifest(kind=kind, files=tuple(files),
                        provenance={"config_hash": config.config_hash(),
                                    "seed": config.seed})
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)


def _report_dict(report):
    return {"params": report.params, "stderr": report.stderr,
            "r_squared": report.r_squared, "n_points": report.n_points,
            "flags": list(report.flags)}


# -- commands ----------------------------------------------------------

def _cmd_simulate_scan(args, config):
    region = args.region
    if region is None:
        extent = config.extent_um
        origin = (0.0, 0.0)
    else:
        extent = (region[2] - region[0], region[3] - region[1])
        origin = (region[0], region[1])
    height = make_wedge_heightmap(extent, config.scan_step_um,
                                  config.base_thickness_um,
                                  config.wedge_slope_um_per_100um,
                                  origin_um=origin)
    rough = sample_roughness_field(extent, config.scan_step_um,
                                   config.roughness_mean_nm,
                                   config.roughness_spread_nm,
                                   seed=config.seed)
    fmap = synthesize_finesse_map(height, rough, config.mirror_set(),
                                  config.optical_constants(),
                                  config.loss_additional_ppm,
                                  config.scan_config())
    write_heightmap(os.path.join(args.out_dir, "heightmap.csv"), height)
    write_finesse_map(os.path.join(args.out_dir, "scanmap.csv"), fmap)
    _emit_manifest(args.out_dir, "scan", ("heightmap.csv", "scanmap.csv"),
                   config)
    return EXIT_OK


def _cmd_analyze_trace(args, config):
    trace = read_trace(args.trace, sweep_hz=config.sweep_hz)
    result = fit_finesse(trace, r2_floor=config.r2_floor)
    record = {"finesse": result.finesse,
              "mode_distance_s": result.mode_distance_s,
              "linewidth_s": result.linewidth_s,
              "valid": result.valid, "reason": result.reason}
    if args.polarization:
        splitting = fit_polarization(trace, sideband_ghz=config.sideband_ghz,
                                     r2_floor=config.r2_floor)
        record["polarization"] = {"splitting_ghz": splitting.splitting_ghz,
                                  "linewidth_ghz": splitting.linewidth_ghz,
                                  "resolved": splitting.resolved,
                                  "r_squared": splitting.r_squared}
    _write_report(os.path.join(args.out_dir, "trace_report.json"), record)
    _emit_manifest(args.out_dir, "traces", ("trace_report.json",), config)
    if not result.valid:
        print(f"trace analysis failed: {result.reason}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _cmd_analyze_scan(args, config):
    height = read_heightmap(args.heightmap)
    fmap = read_finesse_map(args.scanmap)
    height, fmap = _crop_maps(height, fmap, args.region)
    t_nm, finesse = samples_from_maps(height, fmap)
    segments = segment_statistics(t_nm, finesse, segment_nm=config.segment_nm,
                                  histogram_bins=config.histogram_bin)
    record = {"n_valid_samples": int(t_nm.size),
              "segments": [dataclasses.asdict(s) for s in segments]}
    _write_report(os.path.join(args.out_dir, "scan_report.json"), record)
    _emit_manifest(args.out_dir, "scan", ("scan_report.json",), config)
    return EXIT_OK


def _cmd_fit_loss(args, config):
    height = read_heightmap(args.heightmap)
    fmap = read_finesse_map(args.scanmap)
    height, fmap = _crop_maps(height, fmap, args.region)
    t_nm, finesse = samples_from_maps(height, fmap)
    report = fit_loss_model(t_nm, finesse, config.mirror_set(),
                            config.optical_constants())
    record = {"loss_model": _report_dict(report)}
    if args.envelopes:
        segments = segment_statistics(t_nm, finesse,
                                      segment_nm=config.segment_nm,
                                      histogram_bins=config.histogram_bin)
        envelopes = fit_envelopes(segments, config.mirror_set(),
                                  config.optical_constants())
        record["envelopes"] = {side: _report_dict(r)
                               for side, r in envelopes.items()}
    _write_report(os.path.join(args.out_dir, "loss_fit.json"), record)
    _emit_manifest(args.out_dir, "scan", ("loss_fit.json",), config)
    if "non-convergence" in report.flags:
        print("loss-model fit did not converge", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _cmd_fit_clipping(args, config):
    lengths, finesse = read_length_sweep(args.sweep)
    slab = DiamondSlab(thickness_nm=args.thickness_nm,
                       roughness_nm=args.sigma_nm)
    report = fit_clipping(lengths, finesse, slab, config.mirror_set(),
                          config.optical_constants(), roc_um=config.roc_um)
    _write_report(os.path.join(args.out_dir, "clipping_fit.json"),
                  _report_dict(report))
    _emit_manifest(args.out_dir, "traces", ("clipping_fit.json",), config)
    if "non-convergence" in report.flags:
        print("clipping fit did not converge", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _cmd_fit_dispersion(args, config):
    spectra = read_spectra(args.spectra, air_gap0_nm=args.gap0_nm,
                           air_gap_step_nm=args.gap_step_nm)
    report = fit_dispersion(spectra, config.optical_constants(),
                            initial_thickness_nm=args.initial_thickness_nm)
    _write_report(os.path.join(args.out_dir, "dispersion_fit.json"),
                  _report_dict(report))
    _emit_manifest(args.out_dir, "spectra", ("dispersion_fit.json",), config)
    if "non-convergence" in report.flags or "poor-phase-closure" in report.flags:
        print("dispersion fit did not converge", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _cmd_fit_ple(args, config):
    scans = read_ple(args.ple, emitter=args.emitter)
    record = {"emitter": args.emitter}
    if args.emitter == "snv":
        gaussian_fit, dephasing_fit, n_selected = spectral_diffusion_average(
            scans)
        record["diffusion_fwhm_mhz"] = gaussian_fit.fwhm_total_mhz
        record["dephasing_fwhm_mhz"] = dephasing_fit.fwhm_total_mhz
        record["n_selected"] = n_selected
        per_scan_model, floor = "lorentzian", 0.0
    else:
        per_scan_model, floor = "voigt", config.nv_lorentzian_floor_mhz
    fits = []
    for scan in scans.scans:
        try:
            fit = fit_ple_scan(scan, model=per_scan_model,
                               lorentzian_floor_mhz=floor)
        except FitError:
            continue
        if fit.r_squared >= config.r2_floor:
            fits.append(fit)
    if not fits:
        print("no PLE scan produced an acceptable fit", file=sys.stderr)
        return EXIT_FIT
    record["n_fitted"] = len(fits)
    record["statistics"] = ple_statistics(fits)
    _write_report(os.path.join(args.out_dir, "ple_fit.json"), record)
    _emit_manifest(args.out_dir, "ple", ("ple_fit.json",), config)
    return EXIT_OK


def _cmd_render(args, config):
    fmap = read_finesse_map(args.scanmap)
    if args.region is not None:
        height = HeightMap(origin_um=fmap.origin_um, pitch_um=fmap.pitch_um,
                           grid_um=np.zeros_like(fmap.finesse))
        _, fmap = _crop_maps(height, fmap, args.region)
    render_heatmap_svg(os.path.join(args.out_dir, "scanmap.svg"),
                       fmap.finesse, fmap.pitch_um, mask=fmap.valid,
                       label="finesse",
                       scale_csv_path=os.path.join(args.out_dir,
                                                   "colorscale.csv"))
    _emit_manifest(args.out_dir, "scan", ("scanmap.svg", "colorscale.csv"),
                   config)
    return EXIT_OK


# -- wiring ------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="scmkit",
        description="Simulation and analysis toolkit for diamond-membrane "
                    "fiber microcavities")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out-dir", default=".", help="output directory")
        p.add_argument("--region", type=_parse_region,
                       help="x0,y0,x1,y1 region of interest in um")

    p = sub.add_parser("simulate-scan", help="synthesize a scan dataset")
    common(p)
    p.set_defaults(func=_cmd_simulate_scan)

    p = sub.add_parser("analyze-trace", help="finesse from a sweep trace")
    p.add_argument("trace", help="trace CSV (time_s,voltage_v)")
    p.add_argument("--polarization", action="store_true",
                   help="also fit the polarization splitting")
    common(p)
    p.set_defaults(func=_cmd_analyze_trace)

    p = sub.add_parser("analyze-scan", help="segment statistics of a scan")
    p.add_argument("heightmap", help="height map CSV")
    p.add_argument("scanmap", help="finesse map CSV")
    common(p)
    p.set_defaults(func=_cmd_analyze_scan)

    p = sub.add_parser("fit-loss", help="roughness/additional-loss fit")
    p.add_argument("heightmap", help="height map CSV")
    p.add_argument("scanmap", help="finesse map CSV")
    p.add_argument("--envelopes", action="store_true",
                   help="also fit the mean +- sigma envelopes")
    common(p)
    p.set_defaults(func=_cmd_fit_loss)

    p = sub.add_parser("fit-clipping", help="feature-diameter fit")
    p.add_argument("sweep", help="length sweep CSV (cavity_length_um,finesse)")
    p.add_argument("--thickness-nm", type=float, default=0.0,
                   help="diamond thickness during the sweep")
    p.add_argument("--sigma-nm", type=float, default=0.0,
                   help="interface roughness during the sweep")
    common(p)
    p.set_defaults(func=_cmd_fit_clipping)

    p = sub.add_parser("fit-dispersion", help="diamond thickness from spectra")
    p.add_argument("spectra", help="spectra CSV "
                   "(length_step,wavelength_nm,intensity)")
    p.add_argument("--gap0-nm", type=float, default=0.0,
                   help="nominal air gap at step 0")
    p.add_argument("--gap-step-nm", type=float, default=0.0,
                   help="nominal air gap increment per step")
    p.add_argument("--initial-thickness-nm", type=float,
                   help="skip the coarse thickness scan")
    common(p)
    p.set_defaults(func=_cmd_fit_dispersion)

    p = sub.add_parser("fit-ple", help="emitter linewidths from PLE scans")
    p.add_argument("ple", help="PLE CSV (scan_id,freq_mhz,counts)")
    p.add_argument("--emitter", choices=("snv", "nv"), required=True)
    common(p)
    p.set_defaults(func=_cmd_fit_ple)

    p = sub.add_parser("render", help="SVG heatmap of a finesse map")
    p.add_argument("scanmap", help="finesse map CSV")
    common(p)
    p.set_defaults(func=_cmd_render)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        config = (ToolConfig.from_file(args.config) if args.config
                  else ToolConfig())
        config = config.with_overrides(seed=args.seed)
        os.makedirs(args.out_dir, exist_ok=True)
    except (OSError, ValueError, TypeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args, config)
    except (FitError, ModeDetectionError, DispersionAmbiguityError,
            StabilityError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (FormatError, FileNotFoundError, RegistrationError,
            ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
