import json
import os

import numpy as np
import pytest

from scmkit.cli import main
from scmkit.config import ToolConfig
from scmkit.formats import (
    FormatError,
    Manifest,
    read_finesse_map,
    read_heightmap,
    read_manifest,
    read_ple,
    read_spectra,
    read_trace,
    write_finesse_map,
    write_heightmap,
    write_length_sweep,
    write_manifest,
    write_ple,
    write_spectra,
    write_trace,
)
from scmkit.optics import (
    DiamondSlab,
    FiberTip,
    MirrorSet,
    OpticalConstants,
    clipping_loss_ppm,
    effective_losses,
)
from scmkit.render import colormap_rgb, render_heatmap_svg
from scmkit.synth import (
    ScanConfig,
    make_wedge_heightmap,
    sample_roughness_field,
    synthesize_dispersion_spectra,
    synthesize_finesse_map,
    synthesize_ple_scans,
    synthesize_trace,
)

CONSTANTS = OpticalConstants()
MIRRORS = MirrorSet()


class TestToolConfig:
    def test_spec_defaults(self):
        config = ToolConfig()
        assert config.wavelength_nm == 637.0
        assert config.n_diamond == 2.41
        assert config.loss_fiber_ppm == 50.0
        assert config.loss_sample_diamond_ppm == 670.0
        assert config.roc_um == 17.3
        assert config.sideband_ghz == 6.0
        assert config.scan_step_um == 0.2
        assert config.sweep_hz == 300.0
        assert config.segment_nm == 10.0
        assert config.histogram_bin == 100
        assert config.r2_floor == 0.95
        assert config.nv_lorentzian_floor_mhz == 13.0

    def test_json_round_trip(self):
        config = ToolConfig(seed=7, roughness_mean_nm=1.1)
        assert ToolConfig.from_json(config.to_json()) == config

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError, match="unknown"):
            ToolConfig.from_json('{"wavelenght_nm": 637}')

    def test_validation(self):
        with pytest.raises(ValueError):
            ToolConfig(wavelength_nm=-1.0)
        with pytest.raises(ValueError):
            ToolConfig(n_diamond=0.5)
        with pytest.raises(ValueError):
            ToolConfig(r2_floor=1.5)

    def test_hash_tracks_content(self):
        a, b = ToolConfig(), ToolConfig(seed=1)
        assert a.config_hash() == ToolConfig().config_hash()
        assert a.config_hash() != b.config_hash()

    def test_overrides_ignore_none(self):
        config = ToolConfig(seed=5).with_overrides(seed=None)
        assert config.seed == 5


class TestFormats:
    def test_heightmap_round_trip_bitwise(self, tmp_path):
        height = make_wedge_heightmap((3.0, 2.0), 0.5, 2.3, 0.7)
        path = tmp_path / "height.csv"
        write_heightmap(path, height)
        again = read_heightmap(path)
        assert np.array_equal(again.grid_um, height.grid_um)
        assert again.pitch_um == height.pitch_um
        assert again.origin_um == height.origin_um

    def test_finesse_map_round_trip(self, tmp_path):
        wedge = make_wedge_heightmap((4.0, 4.0), 0.5, 2.3, 0.7)
        rough = sample_roughness_field((4.0, 4.0), 0.5, 0.9, 0.2, seed=1)
        fmap = synthesize_finesse_map(wedge, rough, MIRRORS, CONSTANTS, 610.0,
                                      ScanConfig(samples_per_trace=2000))
        path = tmp_path / "scan.csv"
        write_finesse_map(path, fmap)
        again = read_finesse_map(path)
        assert np.array_equal(again.finesse, fmap.finesse)
        assert np.array_equal(again.valid, fmap.valid)
        assert np.array_equal(again.linewidth_ghz, fmap.linewidth_ghz)

    def test_trace_round_trip_and_monotonicity(self, tmp_path):
        path = tmp_path / "trace.csv"
        trace = synthesize_trace(1000.0,
                                 config=ScanConfig(samples_per_trace=2000))
        write_trace(path, trace)
        again = read_trace(path, sweep_hz=300.0)
        assert np.array_equal(again.time_s, trace.time_s)
        assert np.array_equal(again.voltage_v, trace.voltage_v)

        path.write_text("time_s,voltage_v\n0.0,1.0\n0.2,1.0\n0.1,1.0\n")
        with pytest.raises(FormatError, match=":4"):
            read_trace(path, sweep_hz=300.0)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("t,v\n0.0,1.0\n")
        with pytest.raises(FormatError, match="header"):
            read_trace(path, sweep_hz=300.0)

    def test_bad_number_names_column(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text("time_s,voltage_v\n0.0,oops\n")
        with pytest.raises(FormatError, match="voltage_v"):
            read_trace(path, sweep_hz=300.0)

    def test_spectra_round_trip(self, tmp_path):
        spectra = synthesize_dispersion_spectra((3000.0, 3100.0), 0.0,
                                                CONSTANTS, length_steps=3,
                                                wavelength_points=50)
        path = tmp_path / "spectra.csv"
        write_spectra(path, spectra)
        again = read_spectra(path, air_gap0_nm=3000.0, air_gap_step_nm=50.0)
        assert np.array_equal(again.wavelength_nm, spectra.wavelength_nm)
        assert np.array_equal(again.intensity, spectra.intensity)
        assert np.allclose(again.air_gaps_nm, [3000.0, 3050.0, 3100.0])

    def test_ple_round_trip(self, tmp_path):
        scans = synthesize_ple_scans("snv", 32.0, 20.0, 4, seed=3)
        path = tmp_path / "ple.csv"
        write_ple(path, scans)
        again = read_ple(path, emitter="snv")
        assert len(again.scans) == 4
        for (fa, ca), (fb, cb) in zip(again.scans, scans.scans):
            assert np.array_equal(fa, fb)
            assert np.array_equal(ca, cb)

    def test_manifest_missing_file(self, tmp_path):
        (tmp_path / "a.csv").write_text("x\n")
        manifest = Manifest(kind="scan", files=("a.csv", "b.csv"),
                            provenance={"config_hash": "00", "seed": 0})
        path = tmp_path / "manifest.json"
        write_manifest(path, manifest)
        with pytest.raises(FormatError, match="b.csv"):
            read_manifest(path)
        manifest = Manifest(kind="scan", files=("a.csv",),
                            provenance={"config_hash": "00", "seed": 0})
        write_manifest(path, manifest)
        assert read_manifest(path).files == ("a.csv",)

    def test_manifest_kind_checked(self):
        with pytest.raises(FormatError):
            Manifest(kind="movie", files=(), provenance={})


class TestRender:
    def test_svg_and_scale_written_deterministically(self, tmp_path):
        grid = np.linspace(0.0, 1.0, 12).reshape(3, 4)
        mask = np.ones_like(grid, dtype=bool)
        mask[0, 0] = False
        svg = tmp_path / "map.svg"
        scale = tmp_path / "scale.csv"
        render_heatmap_svg(svg, grid, 0.2, mask=mask, label="finesse",
                           scale_csv_path=scale)
        first = svg.read_bytes()
        assert b"<svg" in first and b"#303030" in first
        assert scale.read_text().startswith("value,color\n")
        render_heatmap_svg(svg, grid, 0.2, mask=mask, label="finesse",
                           scale_csv_path=scale)
        assert svg.read_bytes() == first

    def test_colormap_endpoints(self):
        assert colormap_rgb(0.0) == (68, 1, 84)
        assert colormap_rgb(1.0) == (253, 231, 37)


def run(args):
    return main([str(a) for a in args])


class TestCLI:
    def test_simulate_analyze_fit_round_trip(self, tmp_path):
        config = ToolConfig(extent_um=(70.0, 4.0), roughness_mean_nm=0.9,
                            loss_additional_ppm=610.0, seed=3)
        config_path = tmp_path / "config.json"
        config_path.write_text(config.to_json())
        out = tmp_path / "scan"
        assert run(["simulate-scan", "--config", config_path,
                    "--out-dir", out]) == 0
        manifest = read_manifest(out / "manifest.json")
        assert manifest.kind == "scan"
        assert manifest.provenance["seed"] == 3

        assert run(["analyze-scan", out / "heightmap.csv",
                    out / "scanmap.csv", "--config", config_path,
                    "--out-dir", out]) == 0
        scan_report = json.loads((out / "scan_report.json").read_text())
        assert scan_report["n_valid_samples"] > 1000

        assert run(["fit-loss", out / "heightmap.csv", out / "scanmap.csv",
                    "--config", config_path, "--out-dir", out]) == 0
        loss = json.loads((out / "loss_fit.json").read_text())
        assert loss["loss_model"]["params"]["sigma_nm"] == pytest.approx(
            0.9, abs=0.05)
        assert loss["loss_model"]["params"][
            "loss_additional_ppm"] == pytest.approx(610.0, abs=20.0)

        assert run(["render", out / "scanmap.csv", "--out-dir", out]) == 0
        assert (out / "scanmap.svg").exists()
        assert (out / "colorscale.csv").exists()

    def test_analyze_trace(self, tmp_path):
        trace = synthesize_trace(
            1000.0, config=ScanConfig(samples_per_trace=100_000,
                                      noise_rms_v=0.002, seed=2))
        path = tmp_path / "trace.csv"
        write_trace(path, trace)
        assert run(["analyze-trace", path, "--out-dir", tmp_path]) == 0
        report = json.loads((tmp_path / "trace_report.json").read_text())
        assert report["valid"]
        assert report["finesse"] == pytest.approx(1000.0, rel=0.02)

    def test_analyze_trace_failure_exit_code(self, tmp_path):
        t = np.linspace(0.0, 1.0 / 300.0, 5000, endpoint=False)
        rng = np.random.default_rng(0)
        path = tmp_path / "flat.csv"
        rows = "\n".join(f"{ti:.9g},{vi:.9g}"
                         for ti, vi in zip(t, rng.normal(0, 0.002, t.size)))
        path.write_text("time_s,voltage_v\n" + rows + "\n")
        assert run(["analyze-trace", path, "--out-dir", tmp_path]) == 3

    def test_missing_file_is_input_error(self, tmp_path):
        assert run(["analyze-trace", tmp_path / "nope.csv",
                    "--out-dir", tmp_path]) == 2

    def test_bad_config_is_input_error(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text('{"n_diamond": 0.5}')
        assert run(["simulate-scan", "--config", config_path,
                    "--out-dir", tmp_path]) == 2

    def test_fit_clipping_command(self, tmp_path):
        lengths = np.linspace(2.0, 14.0, 20)
        base = effective_losses(DiamondSlab(0.0), MIRRORS,
                                CONSTANTS).loss_effective_ppm
        fiber = FiberTip(roc_um=17.3, feature_diameter_um=8.0)
        clip = np.array([clipping_loss_ppm(l, fiber, CONSTANTS)
                         for l in lengths])
        finesse = 2.0 * np.pi / ((base + 390.0 + clip) * 1e-6)
        path = tmp_path / "sweep.csv"
        write_length_sweep(path, lengths, finesse)
        assert run(["fit-clipping", path, "--out-dir", tmp_path]) == 0
        report = json.loads((tmp_path / "clipping_fit.json").read_text())
        assert report["params"]["feature_diameter_um"] == pytest.approx(
            8.0, rel=0.02)

    def test_fit_dispersion_command(self, tmp_path):
        spectra = synthesize_dispersion_spectra((2000.0, 2300.0), 2510.0,
                                                CONSTANTS, length_steps=10,
                                                wavelength_points=3000)
        path = tmp_path / "spectra.csv"
        write_spectra(path, spectra)
        assert run(["fit-dispersion", path, "--gap0-nm", 2000.0,
                    "--gap-step-nm", 300.0 / 9.0,
                    "--initial-thickness-nm", 2500.0,
                    "--out-dir", tmp_path]) == 0
        report = json.loads((tmp_path / "dispersion_fit.json").read_text())
        assert report["params"]["thickness_nm"] == pytest.approx(2510.0,
                                                                 abs=5.0)

    def test_fit_ple_command(self, tmp_path):
        scans = synthesize_ple_scans("snv", 32.0, 60.0, 40, seed=11,
                                     amplitude_counts=3000.0, n_points=481)
        path = tmp_path / "ple.csv"
        write_ple(path, scans)
        assert run(["fit-ple", path, "--emitter", "snv",
                    "--out-dir", tmp_path]) == 0
        report = json.loads((tmp_path / "ple_fit.json").read_text())
        assert report["dephasing_fwhm_mhz"] == pytest.approx(32.0, rel=0.1)
        assert report["statistics"]["count"] == report["n_fitted"]

    def test_region_flag(self, tmp_path):
        out = tmp_path / "scan"
        config = ToolConfig(extent_um=(70.0, 70.0))
        config_path = tmp_path / "config.json"
        config_path.write_text(config.to_json())
        assert run(["simulate-scan", "--config", config_path,
                    "--region", "0,0,10,4", "--out-dir", out]) == 0
        height = read_heightmap(out / "heightmap.csv")
        assert height.grid_um.shape == (21, 51)

    def test_rerun_is_byte_identical(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        config = ToolConfig(extent_um=(10.0, 10.0), roughness_spread_nm=0.2)
        config_path = tmp_path / "config.json"
        config_path.write_text(config.to_json())
        for out in (out_a, out_b):
            assert run(["simulate-scan", "--config", config_path,
                        "--seed", 9, "--out-dir", out]) == 0
        for name in ("heightmap.csv", "scanmap.csv", "manifest.json"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_config_precedence_matrix(self, tmp_path):
        # flag > config file > built-in default, probed via the seed
        # recorded in the provenance manifest
        with_seed = tmp_path / "with_seed.json"
        with_seed.write_text('{"seed": 5, "extent_um": [5.0, 5.0]}')
        without_seed = tmp_path / "without_seed.json"
        without_seed.write_text('{"extent_um": [5.0, 5.0]}')
        cases = [
            (["--config", with_seed, "--seed", 9], 9),  # flag beats file
            (["--config", with_seed], 5),               # file beats default
            (["--config", without_seed], 0),            # built-in default
        ]
        for i, (extra, expected) in enumerate(cases):
            out = tmp_path / f"case{i}"
            assert run(["simulate-scan", "--out-dir", out] + extra) == 0
            manifest = read_manifest(out / "manifest.json")
            assert manifest.provenance["seed"] == expected
