"""Hybrid diamond-air microcavity physics.

Pure, deterministic evaluation of the plano-concave fiber cavity with a
thin diamond slab bonded to the flat mirror: mode structure, loss
channels, finesse, Gaussian beam geometry, clipping, hybrid-mode
dispersion and derived performance figures.

Unit conventions: losses are quoted in ppm at every interface and
converted to fractions exactly once, internally. Lengths carry their
unit in the field name (nm or um).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

PPM = 1e-6


class StabilityError(ValueError):
    """Cavity geometry outside the stable (concave) regime."""


@dataclass(frozen=True)
class OpticalConstants:
    """Probe wavelength and diamond material constants."""

    wavelength_nm: float = 637.0
    n_diamond: float = 2.41
    alpha_per_m: float = 0.0  # absorption coefficient

    def __post_init__(self):
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength_nm must be positive")
        if self.n_diamond <= 1:
            raise ValueError("n_diamond must exceed 1")
        if self.alpha_per_m < 0:
            raise ValueError("alpha_per_m must be nonnegative")


@dataclass(frozen=True)
class MirrorSet:
    """Coating losses of the two mirrors.

    loss_sample_ppm is the diamond-terminated value of the flat sample
    mirror; sample_transmission_fraction says how much of it is
    transmission (default: all of it).
    """

    loss_fiber_ppm: float = 50.0
    loss_sample_ppm: float = 670.0
    sample_transmission_fraction: float = 1.0

    def __post_init__(self):
        if self.loss_fiber_ppm < 0 or self.loss_sample_ppm < 0:
            raise ValueError("mirror losses must be nonnegative")
        if not 0.0 <= self.sample_transmission_fraction <= 1.0:
            raise ValueError("sample_transmission_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class DiamondSlab:
    thickness_nm: float
    roughness_nm: float = 0.0  # rms roughness of the air-diamond interface

    def __post_init__(self):
        if self.thickness_nm < 0:
            raise ValueError("thickness_nm must be nonnegative")
        if self.roughness_nm < 0:
            raise ValueError("roughness_nm must be nonnegative")


@dataclass(frozen=True)
class FiberTip:
    """Concave feature machined into the fiber end facet."""

    roc_um: float = 17.3
    feature_diameter_um: float = 8.0

    def __post_init__(self):
        if self.roc_um <= 0 or self.feature_diameter_um <= 0:
            raise ValueError("fiber tip dimensions must be positive")


@dataclass(frozen=True)
class HybridGeometry:
    """Two-layer cavity: air gap plus diamond slab."""

    air_gap_nm: float
    diamond_thickness_nm: float
    medium_index: float = 1.0  # index of the air part

    def __post_init__(self):
        if self.air_gap_nm < 0 or self.diamond_thickness_nm < 0:
            raise ValueError("layer thicknesses must be nonnegative")


@dataclass(frozen=True)
class BeamGeometry:
    waist_sample_um: float
    width_fiber_um: float

    def __post_init__(self):
        if not self.width_fiber_um >= self.waist_sample_um > 0:
            raise ValueError("expected width_fiber_um >= waist_sample_um > 0")


@dataclass(frozen=True)
class ModeIndex:
    q: int
    kind: str  # "air_like" or "diamond_like"

    def __post_init__(self):
        if self.kind not in ("air_like", "diamond_like"):
            raise ValueError(f"unknown mode kind {self.kind!r}")
        if self.q < 0:
            raise ValueError("q must be nonnegative")


@dataclass(frozen=True)
class LossBreakdown:
    """Per-channel loss ledger (all ppm, diamond channels already
    weighted by the field-intensity ratio) and the resulting finesse."""

    field_ratio: float
    loss_air_mirror_ppm: float
    loss_sample_mirror_ppm: float
    loss_absorption_ppm: float
    loss_scattering_ppm: float
    loss_additional_ppm: float
    loss_effective_ppm: float
    finesse: float


def mode_thickness_nm(mode: ModeIndex, constants: OpticalConstants) -> float:
    """Diamond thickness at which the mode of index ``mode`` sits.

    Air-like modes: q * lambda / (2 n_d); diamond-like modes:
    (2q + 1) * lambda / (4 n_d).
    """
    lam, n = constants.wavelength_nm, constants.n_diamond
    if mode.kind == "air_like":
        return mode.q * lam / (2.0 * n)
    return (2 * mode.q + 1) * lam / (4.0 * n)


def field_intensity_ratio(t_d_nm: float, constants: OpticalConstants) -> float:
    """Intensity ratio n_d E^2_max,d / E^2_max,a of the standing wave.

    Oscillates between 1/n_d (air-like thicknesses) and n_d
    (diamond-like thicknesses).
    """
    n = constants.n_diamond
    phase = 2.0 * np.pi * n * t_d_nm / constants.wavelength_nm
    return 1.0 / (np.sin(phase) ** 2 / n + n * np.cos(phase) ** 2)


def scattering_loss_ppm(t_d_nm: float, roughness_nm: float,
                        constants: OpticalConstants) -> float:
    """Round-trip scattering loss at the air-diamond interface (ppm).

    Vanishes exactly at air-like thicknesses, maximal at diamond-like
    ones, quadratic in the rms roughness.
    """
    lam, n = constants.wavelength_nm, constants.n_diamond
    phase = 2.0 * np.pi * n * t_d_nm / lam
    loss = (np.sin(phase) ** 2
            * (n + 1.0) * (n - 1.0) ** 2 / n
            * (4.0 * np.pi * roughness_nm / lam) ** 2)
    return loss / PPM


def effective_losses(slab: DiamondSlab, mirrors: MirrorSet,
                     constants: OpticalConstants,
                     loss_additional_ppm: float = 0.0) -> LossBreakdown:
    """Total effective round-trip loss budget and finesse.

    The sample-mirror, absorption and scattering channels are weighted
    by the field-intensity ratio; finesse = 2 pi / L_eff.
    """
    ratio = field_intensity_ratio(slab.thickness_nm, constants)
    absorption_ppm = 2.0 * constants.alpha_per_m * slab.thickness_nm * 1e-9 / PPM
    scattering_ppm = scattering_loss_ppm(slab.thickness_nm, slab.roughness_nm,
                                         constants)
    sample_ppm = ratio * mirrors.loss_sample_ppm
    absorption_w = ratio * absorption_ppm
    scattering_w = ratio * scattering_ppm
    total_ppm = (mirrors.loss_fiber_ppm + sample_ppm + absorption_w
                 + scattering_w + loss_additional_ppm)
    return LossBreakdown(
        field_ratio=float(ratio),
        loss_air_mirror_ppm=mirrors.loss_fiber_ppm,
        loss_sample_mirror_ppm=float(sample_ppm),
        loss_absorption_ppm=float(absorption_w),
        loss_scattering_ppm=float(scattering_w),
        loss_additional_ppm=loss_additional_ppm,
        loss_effective_ppm=float(total_ppm),
        finesse=float(2.0 * np.pi / (total_ppm * PPM)),
    )


def outcoupling_efficiency(breakdown: LossBreakdown, mirrors: MirrorSet) -> float:
    """Fraction of the circulating loss leaving through the sample mirror."""
    if breakdown.loss_effective_ppm <= 0:
        raise ValueError("loss_effective_ppm must be positive")
    transmission = (mirrors.sample_transmission_fraction
                    * breakdown.loss_sample_mirror_ppm)
    return transmission / breakdown.loss_effective_ppm


def beam_geometry(cavity_length_um: float, fiber: FiberTip,
                  constants: OpticalConstants) -> BeamGeometry:
    """Fundamental-mode waist on the flat mirror and width on the fiber.

    Raises StabilityError at or beyond the concave stability limit
    (cavity length >= radius of curvature).
    """
    if cavity_length_um <= 0:
        raise ValueError("cavity_length_um must be positive")
    if cavity_length_um >= fiber.roc_um:
        raise StabilityError(
            f"cavity length {cavity_length_um} um >= ROC {fiber.roc_um} um")
    lam_um = constants.wavelength_nm * 1e-3
    length = cavity_length_um
    waist = math.sqrt(lam_um / math.pi) * (length * (fiber.roc_um - length)) ** 0.25
    width = waist * math.sqrt(
        1.0 + (length * lam_um / (math.pi * waist ** 2)) ** 2)
    return BeamGeometry(waist_sample_um=waist, width_fiber_um=width)


def clipping_loss_ppm(cavity_length_um: float, fiber: FiberTip,
                      constants: OpticalConstants) -> float:
    """Round-trip clipping loss on the concave fiber feature (ppm)."""
    beam = beam_geometry(cavity_length_um, fiber, constants)
    loss = math.exp(-2.0 * (fiber.feature_diameter_um
                            / (2.0 * beam.width_fiber_um)) ** 2)
    return loss / PPM


def _branch_arctan(phase: np.ndarray, n: float) -> np.ndarray:
    """Continuous branch of arctan(tan(phase) / n).

    Equals phase at multiples of pi/2 and is strictly increasing; used
    to express the two-layer resonance condition as a single monotone
    phase.
    """
    k = np.round(phase / np.pi)
    return k * np.pi + np.arctan(np.tan(phase - k * np.pi) / n)


def hybrid_round_trip_phase(wavelength_nm, geometry: HybridGeometry,
                            constants: OpticalConstants):
    """Half round-trip phase of the air+diamond stack.

    Resonances of the two-layer cavity (perfectly reflecting
    boundaries, field and derivative continuous at the interface) occur
    exactly where this phase is an integer multiple of pi. Strictly
    decreasing in wavelength.
    """
    lam = np.asarray(wavelength_nm, dtype=float)
    n = constants.n_diamond
    phase_air = (2.0 * np.pi * geometry.medium_index
                 * geometry.air_gap_nm / lam)
    phase_diamond = 2.0 * np.pi * n * geometry.diamond_thickness_nm / lam
    return phase_air + _branch_arctan(phase_diamond, n)


def hybrid_resonances(geometry: HybridGeometry, constants: OpticalConstants,
                      band_nm: tuple[float, float] = (600.0, 700.0)) -> np.ndarray:
    """All resonance wavelengths of the hybrid cavity inside ``band_nm``.

    Solves tan(2 pi n_d t_d / lambda) = -n_d tan(2 pi t_a / lambda) via
    a dense pre-scan of the monotone round-trip phase followed by
    bracketed root refinement to 1e-12 relative tolerance. Returns an
    ascending array; empty band yields an empty array.
    """
    lo, hi = float(min(band_nm)), float(max(band_nm))
    if geometry.air_gap_nm + geometry.diamond_thickness_nm <= 0:
        return np.array([])
    if lo >= hi:
        return np.array([])

    def phase(lam):
        return float(hybrid_round_trip_phase(lam, geometry, constants))

    # Pre-scan at lambda/2000 spacing, refined so no pi-crossing of the
    # (monotone) phase can hide between grid points.
    n = constants.n_diamond
    max_slope = (2.0 * np.pi
                 * (geometry.medium_index * geometry.air_gap_nm
                    + n ** 2 * geometry.diamond_thickness_nm) / lo ** 2)
    step = min(lo / 2000.0, np.pi / (4.0 * max_slope))
    grid = np.linspace(lo, hi, max(int(np.ceil((hi - lo) / step)) + 1, 16))
    values = hybrid_round_trip_phase(grid, geometry, constants)

    roots = []
    order = np.floor(values / np.pi + 1e-13)
    for i in np.nonzero(np.diff(order))[0]:
        # phase decreases with wavelength: crossing m*pi with m from the
        # higher-order side of the bracket
        for m in range(int(order[i]), int(order[i + 1]), -1):
            target = m * np.pi
            f = lambda lam: phase(lam) - target
            a, b = grid[i], grid[i + 1]
            fa, fb = f(a), f(b)
            if fa == 0.0:
                roots.append(a)
                continue
            if fb == 0.0:
                roots.append(b)
                continue
            if fa * fb > 0:
                continue
            roots.append(brentq(f, a, b, xtol=1e-10, rtol=1e-14))
    # Endpoint resonances missed by the interior brackets.
    for lam in (lo, hi):
        v = phase(lam)
        if abs(v - np.pi * round(v / np.pi)) < 1e-9 and not any(
                abs(lam - r) < 1e-6 for r in roots):
            roots.append(lam)
    return np.array(sorted(roots))


def purcell_estimate(finesse: float, geometry: HybridGeometry,
                     fiber: FiberTip, constants: OpticalConstants) -> float:
    """Order-of-magnitude Purcell factor for an emitter in the diamond.

    Hemispherical-cavity estimate: F_P = 3 lambda^3 Q / (4 pi^2 V n_d^3)
    with Q = finesse * L_opt / (lambda / 2), mode volume
    V = (pi / 4) w_0^2 L_opt, and optical length L_opt = t_a + n_d t_d.
    Linear in finesse; to be read as an estimate, not a field solution.
    """
    if finesse < 0:
        raise ValueError("finesse must be nonnegative")
    if finesse == 0:
        return 0.0
    lam_um = constants.wavelength_nm * 1e-3
    n = constants.n_diamond
    optical_um = (geometry.air_gap_nm + n * geometry.diamond_thickness_nm) * 1e-3
    geometric_um = (geometry.air_gap_nm + geometry.diamond_thickness_nm) * 1e-3
    beam = beam_geometry(geometric_um, fiber, constants)
    quality = finesse * optical_um / (lam_um / 2.0)
    volume = (np.pi / 4.0) * beam.waist_sample_um ** 2 * optical_um
    return 3.0 * lam_um ** 3 * quality / (4.0 * np.pi ** 2 * volume * n ** 3)


def bare_cavity_loss(mirrors: MirrorSet, constants: OpticalConstants,
                     loss_additional_ppm: float = 0.0) -> LossBreakdown:
    """Loss budget with no diamond in the cavity (t_d = 0)."""
    return effective_losses(DiamondSlab(thickness_nm=0.0), mirrors, constants,
                            loss_additional_ppm)
