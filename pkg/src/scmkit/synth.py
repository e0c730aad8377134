"""Seeded synthesis of scanning-cavity-microscopy datasets.

Everything here is deterministic for a fixed seed and config: height
maps, roughness fields, per-pixel finesse maps, triangular-sweep
transmission traces (optionally with polarization splitting and
modulation sidebands), white-light dispersion spectra and PLE scan
sets. Used for round-trip validation of the analysis operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter
from scipy.special import voigt_profile

from .optics import (
    OpticalConstants,
    MirrorSet,
    HybridGeometry,
    field_intensity_ratio,
    hybrid_resonances,
    scattering_loss_ppm,
)

SPEED_OF_LIGHT_M_S = 299_792_458.0

# Fraction of each sweep half distorted by the piezo turnaround, and the
# strength of the cubic distortion there. The central 80 % stays linear.
TURNAROUND_FRACTION = 0.1
TURNAROUND_STRENGTH = 0.15

SIDEBAND_RELATIVE_AMPLITUDE = 0.3  # modulation depth is not pinned down
SECOND_POLARIZATION_AMPLITUDE = 0.8


class RegistrationError(ValueError):
    """Two lateral grids do not share pitch/origin/shape."""


@dataclass(frozen=True)
class HeightMap:
    """Diamond thickness on a regular lateral grid (grid[iy, ix], um)."""

    origin_um: tuple[float, float]
    pitch_um: float
    grid_um: np.ndarray
    frame: str = ""

    def __post_init__(self):
        if self.pitch_um <= 0:
            raise ValueError("pitch_um must be positive")
        grid = np.asarray(self.grid_um, dtype=float)
        if grid.ndim != 2:
            raise ValueError("grid_um must be 2D")
        if np.any(grid < 0):
            raise ValueError("thicknesses must be nonnegative")
        object.__setattr__(self, "grid_um", grid)

    def x_coords_um(self):
        return self.origin_um[0] + self.pitch_um * np.arange(self.grid_um.shape[1])

    def y_coords_um(self):
        return self.origin_um[1] + self.pitch_um * np.arange(self.grid_um.shape[0])


@dataclass(frozen=True)
class RoughnessField:
    """Per-cell rms surface roughness (nm) on the same grid layout."""

    grid_nm: np.ndarray
    correlation_length_um: float
    seed: int

    def __post_init__(self):
        grid = np.asarray(self.grid_nm, dtype=float)
        if np.any(grid < 0):
            raise ValueError("roughness must be nonnegative")
        object.__setattr__(self, "grid_nm", grid)


@dataclass(frozen=True)
class ScanConfig:
    step_um: float = 0.2
    sweep_hz: float = 300.0
    samples_per_trace: int = 100_000
    cavity_length_um: float = 5.0
    sideband_ghz: float = 6.0
    noise_rms_v: float = 0.002
    seed: int = 0

    def __post_init__(self):
        if self.step_um <= 0:
            raise ValueError("step_um must be positive")
        if self.samples_per_trace < 1000:
            raise ValueError("samples_per_trace must be at least 1000")
        if not 0 < self.cavity_length_um < 15.0:
            raise ValueError("cavity_length_um must lie in (0, 15) um")


@dataclass(frozen=True)
class TransmissionTrace:
    """Photodiode trace of one triangular cavity-length sweep."""

    time_s: np.ndarray
    voltage_v: np.ndarray
    sweep_hz: float
    sweep_amplitude_v: float = 1.0

    def __post_init__(self):
        t = np.asarray(self.time_s, dtype=float)
        v = np.asarray(self.voltage_v, dtype=float)
        if t.shape != v.shape:
            raise ValueError("time and voltage must have equal length")
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("time axis must be strictly increasing")
        object.__setattr__(self, "time_s", t)
        object.__setattr__(self, "voltage_v", v)


@dataclass(frozen=True)
class FinesseMap:
    """Per-pixel cavity observables on the scan grid."""

    origin_um: tuple[float, float]
    pitch_um: float
    finesse: np.ndarray
    linewidth_ghz: np.ndarray
    splitting_ghz: np.ndarray
    transmission: np.ndarray
    valid: np.ndarray

    def x_coords_um(self):
        return self.origin_um[0] + self.pitch_um * np.arange(self.finesse.shape[1])

    def y_coords_um(self):
        return self.origin_um[1] + self.pitch_um * np.arange(self.finesse.shape[0])


@dataclass(frozen=True)
class PLEScanSet:
    """Repeated resonant-laser scans over one emitter's zero-phonon line."""

    scans: list  # of (freq_mhz, counts) array pairs
    emitter: str  # "snv" or "nv"
    repump: str = ""

    def __post_init__(self):
        if self.emitter not in ("snv", "nv"):
            raise ValueError(f"unknown emitter {self.emitter!r}")
        for freq, _ in self.scans:
            if np.any(np.diff(freq) <= 0):
                raise ValueError("scan frequency axes must be strictly monotone")


@dataclass(frozen=True)
class DispersionSpectra:
    """White-light transmission spectra over an air-gap sweep."""

    air_gaps_nm: np.ndarray
    wavelength_nm: np.ndarray
    intensity: np.ndarray  # (len(air_gaps), len(wavelength))
    instrument_fwhm_nm: float
    diamond_thickness_nm: float


def make_wedge_heightmap(extent_um: tuple[float, float], pitch_um: float,
                         base_thickness_um: float, slope_um_per_100um: float,
                         direction_rad: float = 0.0,
                         origin_um: tuple[float, float] = (0.0, 0.0)) -> HeightMap:
    """Plane height map t(x, y) = base + slope * lateral projection."""
    if extent_um[0] <= 0 or extent_um[1] <= 0 or pitch_um <= 0:
        raise ValueError("extent and pitch must be positive")
    nx = int(round(extent_um[0] / pitch_um)) + 1
    ny = int(round(extent_um[1] / pitch_um)) + 1
    x = pitch_um * np.arange(nx)
    y = pitch_um * np.arange(ny)
    projection = (np.cos(direction_rad) * x[np.newaxis, :]
                  + np.sin(direction_rad) * y[:, np.newaxis])
    grid = base_thickness_um + (slope_um_per_100um / 100.0) * projection
    return HeightMap(origin_um=origin_um, pitch_um=pitch_um, grid_um=grid,
                     frame="synthetic wedge")


def sample_roughness_field(extent_um: tuple[float, float], pitch_um: float,
                           mean_sigma_nm: float, sigma_spread_nm: float,
                           correlation_length_um: float = 1.0,
                           seed: int = 0) -> RoughnessField:
    """Stationary correlated Gaussian roughness field, clipped at zero.

    The smoothing kernel width is the correlation length; the field is
    renormalized so the cellwise spread equals sigma_spread_nm.
    """
    if mean_sigma_nm < 0:
        raise ValueError("mean_sigma_nm must be nonnegative")
    nx = int(round(extent_um[0] / pitch_um)) + 1
    ny = int(round(extent_um[1] / pitch_um)) + 1
    rng = np.random.default_rng(seed)
    white = rng.standard_normal((ny, nx))
    if sigma_spread_nm > 0:
        kernel_px = correlation_length_um / pitch_um
        smooth = gaussian_filter(white, sigma=kernel_px, mode="wrap")
        std = smooth.std()
        if std > 0:
            smooth = smooth / std
        grid = np.clip(mean_sigma_nm + sigma_spread_nm * smooth, 0.0, None)
    else:
        grid = np.full((ny, nx), mean_sigma_nm)
    return RoughnessField(grid_nm=grid,
                          correlation_length_um=correlation_length_um, seed=seed)


def model_finesse_arrays(thickness_nm, roughness_nm, mirrors: MirrorSet,
                         constants: OpticalConstants, loss_additional_ppm: float):
    """Vectorized loss model: (finesse, L_eff ppm, weighted sample-mirror
    transmission ppm) for thickness/roughness arrays."""
    t_d = np.asarray(thickness_nm, dtype=float)
    ratio = field_intensity_ratio(t_d, constants)
    scattering = scattering_loss_ppm(t_d, np.asarray(roughness_nm, float), constants)
    absorption = 2.0 * constants.alpha_per_m * t_d * 1e-9 / 1e-6
    effective = (mirrors.loss_fiber_ppm
                 + ratio * (mirrors.loss_sample_ppm + absorption + scattering)
                 + loss_additional_ppm)
    finesse = 2.0 * np.pi / (effective * 1e-6)
    sample_transmission = (mirrors.sample_transmission_fraction
                           * ratio * mirrors.loss_sample_ppm)
    return finesse, effective, sample_transmission


def synthesize_finesse_map(height: HeightMap, roughness: RoughnessField,
                           mirrors: MirrorSet, constants: OpticalConstants,
                           loss_additional_ppm: float, config: ScanConfig,
                           transmission_gain_v: float = 1.0,
                           floor_factor: float = 3.0) -> FinesseMap:
    """Per-pixel finesse map from the loss model.

    Pixels whose modeled peak transmission falls below floor_factor
    times the detector noise are marked invalid (no measurable mode).
    """
    if roughness.grid_nm.shape != height.grid_um.shape:
        raise RegistrationError(
            f"height grid {height.grid_um.shape} and roughness grid "
            f"{roughness.grid_nm.shape} are not co-registered")
    t_d_nm = height.grid_um * 1e3
    finesse, effective_ppm, sample_ppm = model_finesse_arrays(
        t_d_nm, roughness.grid_nm, mirrors, constants, loss_additional_ppm)
    # impedance-matched peak transmission of a two-mirror cavity
    transmission = (4.0 * mirrors.loss_fiber_ppm * sample_ppm
                    / effective_ppm ** 2)
    valid = transmission_gain_v * transmission >= floor_factor * config.noise_rms_v
    optical_nm = config.cavity_length_um * 1e3 + (constants.n_diamond - 1.0) * t_d_nm
    fsr_ghz = SPEED_OF_LIGHT_M_S / (2.0 * optical_nm * 1e-9) / 1e9
    return FinesseMap(
        origin_um=height.origin_um,
        pitch_um=height.pitch_um,
        finesse=finesse,
        linewidth_ghz=fsr_ghz / finesse,
        splitting_ghz=np.zeros_like(finesse),
        transmission=transmission,
        valid=valid,
    )


def _sweep_position(t_s: np.ndarray, sweep_hz: float) -> np.ndarray:
    """Cavity-length coordinate of a triangular sweep with cubic piezo
    distortion confined to the outer turnaround fraction of each half."""
    period = 1.0 / sweep_hz
    phase = (t_s % period) / period
    u = np.where(phase < 0.5, 2.0 * phase, 2.0 * (1.0 - phase))
    w = TURNAROUND_FRACTION
    c = TURNAROUND_STRENGTH
    s = u.copy()
    low = u < w
    s[low] -= c * (w - u[low]) ** 3 / w ** 2
    high = u > 1.0 - w
    s[high] += c * (u[high] - (1.0 - w)) ** 3 / w ** 2
    return s


def _lorentzian_peak(x, center, fwhm):
    half = fwhm / 2.0
    return half ** 2 / ((x - center) ** 2 + half ** 2)


def synthesize_trace(finesse: float, modes_in_sweep: int = 5,
                     splitting_ghz: float = 0.0, linewidth_ghz: float = 0.0,
                     config: ScanConfig = ScanConfig(),
                     sidebands_on: bool = False,
                     peak_amplitude_v: float = 1.0) -> TransmissionTrace:
    """One triangular sweep over several fundamental modes.

    The spacing-to-width ratio of the modes in the linear (central)
    sweep region equals ``finesse`` exactly before noise. With
    splitting each fundamental is a Lorentzian pair; with sidebands
    each peak gains two satellites at the modulation frequency. The
    frequency ruler is set by FSR = finesse * linewidth_ghz when a
    linewidth is given.
    """
    if finesse <= 1:
        raise ValueError("finesse must exceed 1")
    if modes_in_sweep < 2:
        raise ValueError("need at least 2 modes in the sweep")
    if (splitting_ghz > 0 or sidebands_on) and linewidth_ghz <= 0:
        raise ValueError("splitting/sidebands require a linewidth_ghz ruler")

    centers = np.linspace(0.04, 0.96, modes_in_sweep)
    spacing = centers[1] - centers[0]
    fwhm_s = spacing / finesse

    components = []  # (center_s, amplitude)
    for center in centers:
        if splitting_ghz > 0:
            ghz_per_s = finesse * linewidth_ghz / spacing
            offset = 0.5 * splitting_ghz / ghz_per_s
            carriers = [(center - offset, 1.0),
                        (center + offset, SECOND_POLARIZATION_AMPLITUDE)]
        else:
            carriers = [(center, 1.0)]
        for c, amp in carriers:
            components.append((c, amp))
            if sidebands_on:
                ghz_per_s = finesse * linewidth_ghz / spacing
                sb = config.sideband_ghz / ghz_per_s
                components.append((c - sb, SIDEBAND_RELATIVE_AMPLITUDE * amp))
                components.append((c + sb, SIDEBAND_RELATIVE_AMPLITUDE * amp))

    n = config.samples_per_trace
    period = 1.0 / config.sweep_hz
    time_s = period * np.arange(n) / n
    s = _sweep_position(time_s, config.sweep_hz)
    voltage = np.zeros(n)
    for center, amp in components:
        voltage += peak_amplitude_v * amp * _lorentzian_peak(s, center, fwhm_s)
    if config.noise_rms_v > 0:
        rng = np.random.default_rng(config.seed)
        voltage = voltage + rng.normal(0.0, config.noise_rms_v, n)
    return TransmissionTrace(time_s=time_s, voltage_v=voltage,
                             sweep_hz=config.sweep_hz)


def synthesize_dispersion_spectra(air_gap_range_nm: tuple[float, float],
                                  diamond_thickness_nm: float,
                                  constants: OpticalConstants,
                                  band_nm: tuple[float, float] = (600.0, 700.0),
                                  length_steps: int = 40,
                                  wavelength_points: int = 800,
                                  instrument_fwhm_nm: float = 0.3) -> DispersionSpectra:
    """Bright-line spectra at the hybrid resonance wavelengths for a
    linear sweep of the air gap, convolved with a Gaussian instrument
    linewidth."""
    lo, hi = float(min(band_nm)), float(max(band_nm))
    if lo >= hi:
        raise ValueError("band must be nonempty")
    air_gaps = np.linspace(air_gap_range_nm[0], air_gap_range_nm[1], length_steps)
    wavelengths = np.linspace(lo, hi, wavelength_points)
    sigma = instrument_fwhm_nm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
    intensity = np.zeros((length_steps, wavelength_points))
    for i, gap in enumerate(air_gaps):
        geometry = HybridGeometry(air_gap_nm=gap,
                                  diamond_thickness_nm=diamond_thickness_nm)
        for res in hybrid_resonances(geometry, constants, band_nm=(lo, hi)):
            intensity[i] += np.exp(-0.5 * ((wavelengths - res) / sigma) ** 2)
    return DispersionSpectra(air_gaps_nm=air_gaps, wavelength_nm=wavelengths,
                             intensity=intensity,
                             instrument_fwhm_nm=instrument_fwhm_nm,
                             diamond_thickness_nm=diamond_thickness_nm)


def gaussian_fwhm_for_voigt_total(total_fwhm_mhz: float,
                                  lorentzian_fwhm_mhz: float) -> float:
    """Gaussian FWHM so that the Voigt total width (Olivero-Longbothum
    combination) equals total_fwhm_mhz given the Lorentzian part."""
    rest = total_fwhm_mhz - 0.5346 * lorentzian_fwhm_mhz
    inside = rest ** 2 - 0.2166 * lorentzian_fwhm_mhz ** 2
    if inside <= 0:
        raise ValueError("total width not reachable with this Lorentzian part")
    return math.sqrt(inside)


def synthesize_ple_scans(emitter: str, homogeneous_fwhm_mhz: float,
                         diffusion_sigma_mhz: float, n_scans: int,
                         seed: int = 0,
                         bistability: tuple[float, float] | None = None,
                         span_mhz: float | None = None,
                         n_points: int = 241,
                         amplitude_counts: float = 400.0,
                         background_counts: float = 2.0) -> PLEScanSet:
    """Repeated PLE scans of one emitter.

    snv: each scan is a Lorentzian of the homogeneous width at a
    per-scan Gaussian-diffused center (repump only before the scan).
    nv: each scan is a Voigt profile combining the homogeneous
    Lorentzian and the diffusion Gaussian (repump at every step).
    ``bistability`` = (splitting_mhz, switch_probability) adds a
    two-state telegraph of the center frequency.
    """
    if homogeneous_fwhm_mhz <= 0:
        raise ValueError("homogeneous_fwhm_mhz must be positive")
    if diffusion_sigma_mhz < 0:
        raise ValueError("diffusion_sigma_mhz must be nonnegative")
    if span_mhz is None:
        span_mhz = 12.0 * max(homogeneous_fwhm_mhz,
                              2.355 * diffusion_sigma_mhz,
                              (bistability[0] if bistability else 0.0))
    rng = np.random.default_rng(seed)
    freq = np.linspace(-span_mhz / 2.0, span_mhz / 2.0, n_points)
    scans = []
    telegraph_state = 0
    for _ in range(n_scans):
        if bistability is not None and rng.random() < bistability[1]:
            telegraph_state = 1 - telegraph_state
        offset = telegraph_state * (bistability[0] if bistability else 0.0)
        if emitter == "snv":
            center = offset + rng.normal(0.0, diffusion_sigma_mhz)
            shape = _lorentzian_peak(freq, center, homogeneous_fwhm_mhz)
        else:
            center = offset
            gamma = homogeneous_fwhm_mhz / 2.0
            sigma = diffusion_sigma_mhz
            profile = voigt_profile(freq - center, sigma, gamma)
            shape = profile / voigt_profile(0.0, sigma, gamma)
        expected = background_counts + amplitude_counts * shape
        counts = rng.poisson(expected).astype(float)
        scans.append((freq.copy(), counts))
    return PLEScanSet(scans=scans, emitter=emitter,
                      repump="per-scan" if emitter == "snv" else "per-step")
