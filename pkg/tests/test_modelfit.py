import numpy as np
import pytest

from scmkit.modelfit import (
    DispersionAmbiguityError,
    extract_dispersion_lines,
    fit_clipping,
    fit_dispersion,
    fit_envelopes,
    fit_loss_model,
    register_heightmap,
    samples_from_maps,
    segment_statistics,
)
from scmkit.optics import (
    DiamondSlab,
    FiberTip,
    MirrorSet,
    OpticalConstants,
    clipping_loss_ppm,
    effective_losses,
)
from scmkit.synth import (
    DispersionSpectra,
    RegistrationError,
    ScanConfig,
    make_wedge_heightmap,
    sample_roughness_field,
    synthesize_dispersion_spectra,
    synthesize_finesse_map,
)

CONSTANTS = OpticalConstants()
MIRRORS = MirrorSet()
CONFIG = ScanConfig(samples_per_trace=2000)


class TestRegistration:
    def test_anchor_offset_applied(self):
        wedge = make_wedge_heightmap((10.0, 10.0), 0.5, 2.0, 0.0)
        registered = register_heightmap(wedge, (5.0, 5.0), 2.51)
        assert np.allclose(registered.grid_um, 2.51)

    def test_anchor_outside_rejected(self):
        wedge = make_wedge_heightmap((10.0, 10.0), 0.5, 2.0, 0.0)
        with pytest.raises(RegistrationError):
            register_heightmap(wedge, (25.0, 5.0), 2.51)

    def test_roi_crop(self):
        wedge = make_wedge_heightmap((10.0, 10.0), 0.5, 2.0, 0.7)
        registered = register_heightmap(wedge, (0.0, 0.0), 2.0,
                                        roi_um=(2.0, 3.0, 6.0, 7.0))
        assert registered.origin_um == (2.0, 3.0)
        assert registered.grid_um.shape == (9, 9)

    def test_samples_require_matching_grids(self):
        wedge = make_wedge_heightmap((10.0, 10.0), 0.5, 2.3, 0.7)
        other = make_wedge_heightmap((10.0, 10.0), 0.25, 2.3, 0.7)
        rough = sample_roughness_field((10.0, 10.0), 0.25, 0.9, 0.0, seed=1)
        fmap = synthesize_finesse_map(other, rough, MIRRORS, CONSTANTS, 610.0,
                                      CONFIG)
        with pytest.raises(RegistrationError):
            samples_from_maps(wedge, fmap)


def make_map(sigma=0.9, spread=0.0, l_add=610.0, extent=(70.0, 10.0),
             seed=7):
    wedge = make_wedge_heightmap(extent, 0.2, 2.3, 0.7)
    rough = sample_roughness_field(extent, 0.2, sigma, spread, seed=seed)
    fmap = synthesize_finesse_map(wedge, rough, MIRRORS, CONSTANTS, l_add,
                                  CONFIG)
    return wedge, fmap


class TestLossModelFit:
    def test_uniform_roughness_round_trip(self):
        wedge, fmap = make_map(sigma=0.9, l_add=610.0)
        t_nm, finesse = samples_from_maps(wedge, fmap)
        report = fit_loss_model(t_nm, finesse, MIRRORS, CONSTANTS)
        assert report.params["sigma_nm"] == pytest.approx(0.9, abs=0.05)
        assert report.params["loss_additional_ppm"] == pytest.approx(610.0,
                                                                     abs=20.0)
        assert abs(report.params["thickness_offset_nm"]) < 2.0
        assert report.r_squared > 0.999

    def test_second_operating_point(self):
        wedge, fmap = make_map(sigma=1.2, l_add=820.0)
        t_nm, finesse = samples_from_maps(wedge, fmap)
        report = fit_loss_model(t_nm, finesse, MIRRORS, CONSTANTS)
        assert report.params["sigma_nm"] == pytest.approx(1.2, abs=0.05)
        assert report.params["loss_additional_ppm"] == pytest.approx(820.0,
                                                                     abs=20.0)

    def test_recovers_thickness_offset(self):
        wedge, fmap = make_map(sigma=0.9, l_add=610.0)
        t_nm, finesse = samples_from_maps(wedge, fmap)
        report = fit_loss_model(t_nm + 10.0, finesse, MIRRORS, CONSTANTS)
        assert report.params["thickness_offset_nm"] == pytest.approx(-10.0,
                                                                     abs=1.0)
        assert report.params["sigma_nm"] == pytest.approx(0.9, abs=0.05)

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError):
            fit_loss_model([2300.0], [2000.0], MIRRORS, CONSTANTS)


class TestSegments:
    def test_statistics_on_synthetic_normals(self):
        rng = np.random.default_rng(0)
        t = np.concatenate([np.full(500, 2305.0), np.full(500, 2315.0),
                            np.full(10, 2325.0)])
        f = np.concatenate([rng.normal(3000.0, 50.0, 500),
                            rng.normal(2000.0, 30.0, 500),
                            rng.normal(1000.0, 10.0, 10)])
        segments = segment_statistics(t, f, segment_nm=10.0)
        assert len(segments) == 2  # the 10-sample slice is skipped
        assert segments[0].mean_finesse == pytest.approx(3000.0, rel=0.01)
        assert segments[0].sigma_finesse == pytest.approx(50.0, rel=0.25)
        assert segments[1].mean_finesse == pytest.approx(2000.0, rel=0.01)

    def test_envelopes_bracket_roughness(self):
        wedge, fmap = make_map(sigma=0.85, spread=0.25, l_add=610.0,
                               extent=(70.0, 30.0))
        t_nm, finesse = samples_from_maps(wedge, fmap)
        segments = segment_statistics(t_nm, finesse)
        reports = fit_envelopes(segments, MIRRORS, CONSTANTS)
        upper_sigma = reports["upper"].params["sigma_nm"]
        lower_sigma = reports["lower"].params["sigma_nm"]
        assert upper_sigma < 0.85 < lower_sigma

    def test_envelope_needs_segments(self):
        with pytest.raises(ValueError):
            fit_envelopes([], MIRRORS, CONSTANTS)


class TestClipping:
    SLAB = DiamondSlab(thickness_nm=0.0)

    def synth_finesse(self, lengths, l_add, diameter):
        base = effective_losses(self.SLAB, MIRRORS, CONSTANTS).loss_effective_ppm
        fiber = FiberTip(roc_um=17.3, feature_diameter_um=diameter)
        clip = np.array([clipping_loss_ppm(l, fiber, CONSTANTS)
                         for l in lengths])
        return 2.0 * np.pi / ((base + l_add + clip) * 1e-6)

    def test_round_trip(self):
        lengths = np.linspace(2.0, 14.0, 25)
        finesse = self.synth_finesse(lengths, 390.0, 8.0)
        report = fit_clipping(lengths, finesse, self.SLAB, MIRRORS, CONSTANTS)
        assert report.params["feature_diameter_um"] == pytest.approx(8.0,
                                                                     rel=0.02)
        assert report.params["loss_additional_ppm"] == pytest.approx(390.0,
                                                                     abs=20.0)
        assert "feature_diameter_unidentifiable" not in report.flags

    def test_no_rolloff_flagged(self):
        lengths = np.linspace(2.0, 5.0, 10)
        finesse = self.synth_finesse(lengths, 390.0, 20.0)
        report = fit_clipping(lengths, finesse, self.SLAB, MIRRORS, CONSTANTS)
        assert "feature_diameter_unidentifiable" in report.flags
        assert report.stderr["feature_diameter_um"] == np.inf
        assert report.params["loss_additional_ppm"] == pytest.approx(390.0,
                                                                     abs=20.0)


class TestDispersion:
    def test_line_extraction_matches_generator(self):
        spectra = synthesize_dispersion_spectra((3000.0, 3300.0), 0.0,
                                                CONSTANTS, length_steps=4,
                                                wavelength_points=2000)
        lines = extract_dispersion_lines(spectra)
        lam = CONSTANTS.wavelength_nm
        for gap, row_lines in zip(spectra.air_gaps_nm, lines):
            for line in row_lines:
                q = 2.0 * gap / line
                assert abs(q - round(q)) < 1e-3

    def test_ambiguous_lines_rejected(self):
        lam = np.linspace(600.0, 700.0, 2000)
        centers = [610.0, 612.0, 640.0, 670.0]
        row = sum(np.exp(-0.5 * ((lam - c) / 0.2) ** 2) for c in centers)
        spectra = DispersionSpectra(air_gaps_nm=np.array([3000.0]),
                                    wavelength_nm=lam,
                                    intensity=row[np.newaxis, :],
                                    instrument_fwhm_nm=0.3,
                                    diamond_thickness_nm=0.0)
        with pytest.raises(DispersionAmbiguityError):
            extract_dispersion_lines(spectra)

    def test_thickness_round_trip(self):
        spectra = synthesize_dispersion_spectra((2000.0, 2600.0), 2510.0,
                                                CONSTANTS, length_steps=30,
                                                wavelength_points=3000)
        report = fit_dispersion(spectra, CONSTANTS)
        assert report.params["thickness_nm"] == pytest.approx(2510.0, abs=5.0)
        assert "poor-phase-closure" not in report.flags

    def test_second_thickness_round_trip(self):
        spectra = synthesize_dispersion_spectra((4000.0, 4600.0), 3310.0,
                                                CONSTANTS, length_steps=30,
                                                wavelength_points=3000)
        report = fit_dispersion(spectra, CONSTANTS)
        assert report.params["thickness_nm"] == pytest.approx(3310.0, abs=5.0)

    def test_initial_guess_shortcut(self):
        spectra = synthesize_dispersion_spectra((2000.0, 2300.0), 2510.0,
                                                CONSTANTS, length_steps=10,
                                                wavelength_points=3000)
        report = fit_dispersion(spectra, CONSTANTS,
                                initial_thickness_nm=2500.0)
        assert report.params["thickness_nm"] == pytest.approx(2510.0, abs=5.0)
