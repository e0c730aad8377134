"""Recovery of physical parameters from maps, sweeps and spectra.

Nonlinear least-squares fits of the cavity loss model to
thickness-resolved finesse data (roughness and additional losses),
of the clipping model to length-resolved finesse (feature diameter),
and of the two-layer dispersion relation to white-light spectra
(diamond thickness). All fits are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks

from .optics import (
    DiamondSlab,
    FiberTip,
    HybridGeometry,
    MirrorSet,
    OpticalConstants,
    clipping_loss_ppm,
    effective_losses,
    hybrid_round_trip_phase,
)
from .synth import HeightMap, FinesseMap, RegistrationError, model_finesse_arrays

PPM = 1e-6
MAX_ITERATIONS = 200
STEP_TOLERANCE = 1e-10
THICKNESS_OFFSET_BOUND_NM = 20.0


class DispersionAmbiguityError(ValueError):
    """Spectral lines too close to assign mode orders unambiguously."""


@dataclass(frozen=True)
class FitReport:
    """Outcome of one nonlinear parameter fit."""

    params: dict
    stderr: dict
    r_squared: float
    n_points: int
    flags: tuple = ()


@dataclass(frozen=True)
class SegmentStats:
    """Finesse statistics of one diamond-thickness segment."""

    thickness_center_nm: float
    n_samples: int
    mean_finesse: float
    sigma_finesse: float
    gaussian_fit: bool  # False when the moment fallback was used


def register_heightmap(height: HeightMap, anchor_xy_um: tuple[float, float],
                       anchor_thickness_um: float,
                       roi_um: tuple[float, float, float, float] | None = None
                       ) -> HeightMap:
    """Tie a relative height map to an absolute thickness anchor.

    Shifts the whole map by a constant so the cell nearest to
    ``anchor_xy_um`` reads ``anchor_thickness_um`` (e.g. from a
    dispersion measurement), then optionally crops to a rectangular
    region of interest (x0, y0, x1, y1).
    """
    x = height.x_coords_um()
    y = height.y_coords_um()
    half = height.pitch_um / 2.0
    if not (x[0] - half <= anchor_xy_um[0] <= x[-1] + half
            and y[0] - half <= anchor_xy_um[1] <= y[-1] + half):
        raise RegistrationError(
            f"anchor {anchor_xy_um} um lies outside the height map "
            f"({x[0]}..{x[-1]}, {y[0]}..{y[-1]}) um")
    ix = int(np.argmin(np.abs(x - anchor_xy_um[0])))
    iy = int(np.argmin(np.abs(y - anchor_xy_um[1])))
    offset = anchor_thickness_um - height.grid_um[iy, ix]
    grid = np.clip(height.grid_um + offset, 0.0, None)
    origin = height.origin_um
    if roi_um is not None:
        x0, y0, x1, y1 = roi_um
        keep_x = (x >= x0) & (x <= x1)
        keep_y = (y >= y0) & (y <= y1)
        if not keep_x.any() or not keep_y.any():
            raise RegistrationError(f"region of interest {roi_um} um is empty")
        grid = grid[np.ix_(keep_y, keep_x)]
        origin = (float(x[keep_x][0]), float(y[keep_y][0]))
    return HeightMap(origin_um=origin, pitch_um=height.pitch_um, grid_um=grid,
                     frame="registered")


def samples_from_maps(height: HeightMap, fmap: FinesseMap):
    """Co-registered (thickness_nm, finesse) sample vectors, valid cells
    only."""
    if (height.grid_um.shape != fmap.finesse.shape
            or height.pitch_um != fmap.pitch_um
            or height.origin_um != fmap.origin_um):
        raise RegistrationError(
            "height map and finesse map are not co-registered")
    mask = fmap.valid.astype(bool)
    return height.grid_um[mask] * 1e3, fmap.finesse[mask]


def _loss_model_finesse(thickness_nm, params, mirrors, constants):
    sigma_nm, loss_add_ppm, offset_nm = params
    finesse, _, _ = model_finesse_arrays(thickness_nm + offset_nm, sigma_nm,
                                         mirrors, constants, loss_add_ppm)
    return finesse


def fit_loss_model(thickness_nm, finesse, mirrors: MirrorSet,
                   constants: OpticalConstants, weights=None) -> FitReport:
    """Fit (roughness, additional loss, thickness offset) to
    thickness-resolved finesse data.

    The mirror losses are held fixed; the thickness offset absorbs a
    small registration error and is bounded to +-20 nm. Weights, if
    given, multiply the finesse residuals (1/stderr convention).
    """
    t = np.asarray(thickness_nm, dtype=float).ravel()
    f = np.asarray(finesse, dtype=float).ravel()
    if t.size != f.size or t.size < 4:
        raise ValueError("need matching arrays with at least 4 samples")
    w = np.ones_like(f) if weights is None else np.asarray(weights,
                                                           float).ravel()

    # best pixels bound the additional loss, worst bound the roughness
    base_best = float(2.0 * np.pi / (f.max() * PPM))
    slack = base_best - effective_losses(
        DiamondSlab(thickness_nm=float(t[np.argmax(f)])), mirrors,
        constants).loss_effective_ppm
    loss_add0 = max(slack, 1.0)
    worst = float(2.0 * np.pi / (f.min() * PPM))
    n = constants.n_diamond
    scatter_coeff = ((n + 1.0) * (n - 1.0) ** 2 / n
                     * (4.0 * np.pi / constants.wavelength_nm) ** 2 / PPM)
    excess = worst - loss_add0 - mirrors.loss_fiber_ppm - n * mirrors.loss_sample_ppm
    sigma0 = np.sqrt(max(excess, 1.0) / (n * scatter_coeff))

    def residual(p):
        return w * (_loss_model_finesse(t, p, mirrors, constants) - f)

    lower = (0.0, 0.0, -THICKNESS_OFFSET_BOUND_NM)
    upper = (np.inf, np.inf, THICKNESS_OFFSET_BOUND_NM)
    result = least_squares(residual, (sigma0, loss_add0, 0.0),
                           bounds=(lower, upper), xtol=STEP_TOLERANCE,
                           ftol=None, gtol=None,
                           max_nfev=MAX_ITERATIONS * 8)
    names = ("sigma_nm", "loss_additional_ppm", "thickness_offset_nm")
    model = _loss_model_finesse(t, result.x, mirrors, constants)
    return FitReport(
        params=dict(zip(names, map(float, result.x))),
        stderr=dict(zip(names, _stderr(result))),
        r_squared=_r_squared(f, model),
        n_points=int(t.size),
        flags=() if result.success else ("non-convergence",),
    )


def _r_squared(y, model):
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        return 1.0
    return float(1.0 - np.sum((y - model) ** 2) / ss_tot)


def _stderr(result):
    dof = result.fun.size - result.x.size
    if dof <= 0:
        return [float("nan")] * result.x.size
    try:
        cov = np.linalg.inv(result.jac.T @ result.jac) * 2.0 * result.cost / dof
    except np.linalg.LinAlgError:
        return [float("nan")] * result.x.size
    return [float(np.sqrt(max(cov[i, i], 0.0))) for i in range(result.x.size)]


def segment_statistics(thickness_nm, finesse, segment_nm: float = 10.0,
                       min_samples: int = 20,
                       histogram_bins: int = 100) -> list[SegmentStats]:
    """Per-thickness-segment finesse statistics.

    Thickness is binned in ``segment_nm`` slices; slices with fewer than
    ``min_samples`` samples are skipped. The spread comes from a
    Gaussian fit of the finesse histogram, falling back to plain
    moments when the fit is not meaningful.
    """
    t = np.asarray(thickness_nm, dtype=float).ravel()
    f = np.asarray(finesse, dtype=float).ravel()
    out = []
    for index in np.unique(np.floor(t / segment_nm).astype(int)):
        sel = f[np.floor(t / segment_nm).astype(int) == index]
        if sel.size < min_samples:
            continue
        center = (index + 0.5) * segment_nm
        mean, sigma = float(sel.mean()), float(sel.std())
        used_gauss = False
        counts, edges = np.histogram(sel, bins=histogram_bins)
        mids = 0.5 * (edges[:-1] + edges[1:])
        if np.count_nonzero(counts) >= 5 and sigma > 0:
            def gauss_residual(p):
                mu, s, a = p
                return a * np.exp(-0.5 * ((mids - mu) / s) ** 2) - counts

            try:
                res = least_squares(gauss_residual,
                                    (mean, sigma, counts.max()),
                                    xtol=STEP_TOLERANCE, ftol=None, gtol=None,
                                    max_nfev=MAX_ITERATIONS * 8)
                if res.success and 0 < res.x[1] < np.ptp(sel):
                    mean, sigma = float(res.x[0]), float(abs(res.x[1]))
                    used_gauss = True
            except (ValueError, np.linalg.LinAlgError):
                pass
        out.append(SegmentStats(thickness_center_nm=float(center),
                                n_samples=int(sel.size), mean_finesse=mean,
                                sigma_finesse=sigma, gaussian_fit=used_gauss))
    return out


def fit_envelopes(segments: list[SegmentStats], mirrors: MirrorSet,
                  constants: OpticalConstants) -> dict:
    """Loss-model fits of the mean +- sigma envelopes of segmented data.

    The upper envelope (best pixels) bounds the roughness from below,
    the lower envelope from above.
    """
    if len(segments) < 4:
        raise ValueError("need at least 4 segments")
    t = np.array([s.thickness_center_nm for s in segments])
    upper = np.array([s.mean_finesse + s.sigma_finesse for s in segments])
    lower = np.array([s.mean_finesse - s.sigma_finesse for s in segments])
    return {
        "upper": fit_loss_model(t, upper, mirrors, constants),
        "lower": fit_loss_model(t, lower, mirrors, constants),
    }


def fit_clipping(cavity_length_um, finesse, slab: DiamondSlab,
                 mirrors: MirrorSet, constants: OpticalConstants,
                 roc_um: float = 17.3) -> FitReport:
    """Fit (additional loss, fiber feature diameter) to length-resolved
    finesse.

    The loss budget at the given slab is held fixed; the finesse
    roll-off at long cavities determines the feature diameter. When the
    data show no roll-off the diameter is flagged unidentifiable.
    """
    lengths = np.asarray(cavity_length_um, dtype=float).ravel()
    f = np.asarray(finesse, dtype=float).ravel()
    if lengths.size != f.size or lengths.size < 3:
        raise ValueError("need matching arrays with at least 3 samples")
    base_ppm = effective_losses(slab, mirrors, constants).loss_effective_ppm

    def clip_ppm(d_um):
        fiber = FiberTip(roc_um=roc_um, feature_diameter_um=d_um)
        return np.array([clipping_loss_ppm(length, fiber, constants)
                         for length in lengths])

    loss_add0 = max(2.0 * np.pi / (f.max() * PPM) - base_ppm, 1.0)
    longest = int(np.argmax(lengths))
    excess = 2.0 * np.pi / (f[longest] * PPM) - base_ppm - loss_add0
    from .optics import beam_geometry
    width = beam_geometry(lengths[longest],
                          FiberTip(roc_um=roc_um, feature_diameter_um=1.0),
                          constants).width_fiber_um
    if excess > 1.0:
        d0 = 2.0 * width * np.sqrt(-0.5 * np.log(excess * PPM))
    else:
        d0 = 3.0 * width

    def residual(p):
        loss_add, d_um = p
        total = base_ppm + loss_add + clip_ppm(d_um)
        return 2.0 * np.pi / (total * PPM) - f

    result = least_squares(residual, (loss_add0, d0),
                           bounds=((0.0, 0.1), (np.inf, 100.0)),
                           xtol=STEP_TOLERANCE, ftol=None, gtol=None,
                           max_nfev=MAX_ITERATIONS * 8)
    loss_add, d_um = result.x
    model = 2.0 * np.pi / ((base_ppm + loss_add + clip_ppm(d_um)) * PPM)
    stderr = _stderr(result)
    flags = () if result.success else ("non-convergence",)
    clip_range = clip_ppm(d_um)
    if clip_range.max() < 0.02 * (base_ppm + loss_add):
        flags = flags + ("feature_diameter_unidentifiable",)
        stderr[1] = float("inf")
    names = ("loss_additional_ppm", "feature_diameter_um")
    return FitReport(params=dict(zip(names, map(float, result.x))),
                     stderr=dict(zip(names, stderr)),
                     r_squared=_r_squared(f, model),
                     n_points=int(lengths.size), flags=flags)


def extract_dispersion_lines(spectra, min_height_fraction: float = 0.3):
    """Per-step resonance wavelengths from white-light spectra.

    Peak positions are refined parabolically on the log intensity.
    Raises DispersionAmbiguityError when two lines in one spectrum are
    closer than half the median line spacing (mode orders would be
    ambiguous).
    """
    lam = spectra.wavelength_nm
    step = lam[1] - lam[0]
    lines = []
    for i, row in enumerate(spectra.intensity):
        peaks, _ = find_peaks(row, height=min_height_fraction * row.max())
        refined = []
        for p in peaks:
            if 0 < p < row.size - 1 and row[p - 1] > 0 and row[p + 1] > 0:
                y0, y1, y2 = np.log(row[p - 1:p + 2])
                denom = y0 - 2.0 * y1 + y2
                delta = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
                refined.append(lam[p] + np.clip(delta, -1.0, 1.0) * step)
            else:
                refined.append(lam[p])
        refined = np.sort(refined)
        if refined.size >= 3:
            gaps = np.diff(refined)
            if gaps.min() < 0.5 * np.median(gaps):
                raise DispersionAmbiguityError(
                    f"length step {i}: line spacing {gaps.min():.3f} nm is "
                    f"under half the median {np.median(gaps):.3f} nm")
        lines.append(refined)
    return lines


def _dispersion_phase(lines, steps, params, constants):
    """Round-trip phase (units of pi) of every extracted line under a
    linear air-gap actuator model."""
    t_d, gap0, gap_per_step = params
    phases = []
    for step, lams in zip(steps, lines):
        geometry = HybridGeometry(air_gap_nm=max(gap0 + gap_per_step * step,
                                                 0.0),
                                  diamond_thickness_nm=max(t_d, 0.0))
        phases.append(hybrid_round_trip_phase(np.asarray(lams), geometry,
                                              constants) / np.pi)
    return np.concatenate(phases)


def fit_dispersion(spectra, constants: OpticalConstants,
                   initial_thickness_nm: float | None = None) -> FitReport:
    """Diamond thickness from the hybrid-mode dispersion of white-light
    spectra.

    Jointly fits (thickness, air gap at step 0, air gap increment) so
    that every extracted line sits at an integer multiple of pi of the
    two-layer round-trip phase. Mode orders are re-rounded between
    polish passes. Without an initial thickness a coarse 1D scan over
    0..5 um seeds the fit.
    """
    lines = extract_dispersion_lines(spectra)
    steps = np.arange(len(lines), dtype=float)
    n_lines = int(sum(len(l) for l in lines))
    if n_lines < 4:
        raise ValueError("need at least 4 spectral lines in total")
    gap0 = float(spectra.air_gaps_nm[0])
    gap_per_step = (float(np.mean(np.diff(spectra.air_gaps_nm)))
                    if len(spectra.air_gaps_nm) > 1 else 0.0)

    def wrapped(params):
        phase = _dispersion_phase(lines, steps, params, constants)
        return phase - np.round(phase)

    if initial_thickness_nm is None:
        candidates = np.arange(0.0, 5000.0, 10.0)
        costs = [np.sum(wrapped((c, gap0, gap_per_step)) ** 2)
                 for c in candidates]
        t_d0 = float(candidates[int(np.argmin(costs))])
    else:
        t_d0 = float(initial_thickness_nm)

    params = np.array([t_d0, gap0, gap_per_step])
    result = None
    orders = None
    for _ in range(10):
        phase = _dispersion_phase(lines, steps, params, constants)
        fixed = np.round(phase)

        def residual(p):
            return _dispersion_phase(lines, steps, p, constants) - fixed

        result = least_squares(residual, params, xtol=STEP_TOLERANCE,
                               ftol=None, gtol=None,
                               max_nfev=MAX_ITERATIONS * 8)
        params = result.x
        new_orders = np.round(_dispersion_phase(lines, steps, params,
                                                constants))
        if orders is not None and np.array_equal(new_orders, orders):
            break
        orders = new_orders

    names = ("thickness_nm", "air_gap0_nm", "air_gap_per_step_nm")
    final = _dispersion_phase(lines, steps, params, constants)
    rms = float(np.sqrt(np.mean((final - np.round(final)) ** 2)))
    flags = () if result.success else ("non-convergence",)
    if rms > 0.05:
        flags = flags + ("poor-phase-closure",)
    return FitReport(params=dict(zip(names, map(float, params))),
                     stderr=dict(zip(names, _stderr(result))),
                     r_squared=1.0 - rms,
                     n_points=n_lines, flags=flags)
