"""Extraction of observables from individual traces and scans.

Finesse from triangular sweeps (mode spacing over Lorentzian
linewidth), polarization splitting via the sideband frequency ruler,
and PLE lineshape decomposition (Lorentzian / Gaussian / Voigt).

All fits are deterministic: initialization follows fixed rules derived
from the data, there are no randomized restarts.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import find_peaks
from scipy.special import voigt_profile

MAX_ITERATIONS = 200
STEP_TOLERANCE = 1e-10
FWHM_GAUSS = 2.0 * np.sqrt(2.0 * np.log(2.0))


class FitError(RuntimeError):
    """A least-squares fit failed to converge or is degenerate."""


class ModeDetectionError(ValueError):
    """No acceptable set of fundamental modes in the trace."""


@dataclass(frozen=True)
class PeakFit:
    center: float
    fwhm: float
    amplitude: float
    offset: float
    r_squared: float
    covariance: np.ndarray | None = None


@dataclass(frozen=True)
class PeakWindow:
    """Sample window around one accepted fundamental mode."""

    start: int
    stop: int
    peak_index: int
    half: int  # 0 = up sweep, 1 = down sweep


@dataclass(frozen=True)
class FinesseResult:
    finesse: float
    mode_distance_s: float
    linewidth_s: float
    chosen_peak: int
    valid: bool
    reason: str = ""


@dataclass(frozen=True)
class SplittingResult:
    splitting_ghz: float
    linewidth_ghz: float
    resolved: bool
    r_squared: float


@dataclass(frozen=True)
class LineshapeFit:
    model: str  # lorentzian | gaussian | voigt
    center_mhz: float
    fwhm_total_mhz: float
    fwhm_lorentzian_mhz: float
    fwhm_gaussian_mhz: float
    amplitude: float
    offset: float
    r_squared: float
    stderr: dict = field(default_factory=dict)


def _lorentz(x, center, fwhm, amplitude, offset):
    half = fwhm / 2.0
    return offset + amplitude * half ** 2 / ((x - center) ** 2 + half ** 2)


def _lorentz_jacobian(x, center, fwhm, amplitude, offset):
    half = fwhm / 2.0
    d2 = (x - center) ** 2 + half ** 2
    shape = half ** 2 / d2
    d_center = amplitude * shape * 2.0 * (x - center) / d2
    d_fwhm = amplitude * (x - center) ** 2 * half / d2 ** 2
    d_amplitude = shape
    d_offset = np.ones_like(x)
    return np.column_stack([d_center, d_fwhm, d_amplitude, d_offset])


def _r_squared(y, model):
    ss_res = np.sum((y - model) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else 0.0
    return 1.0 - ss_res / ss_tot


def _covariance(result):
    """Parameter covariance from the solution Jacobian; None if singular."""
    residual_dof = result.fun.size - result.x.size
    if residual_dof <= 0:
        return None
    try:
        jtj_inv = np.linalg.inv(result.jac.T @ result.jac)
    except np.linalg.LinAlgError:
        return None
    return jtj_inv * 2.0 * result.cost / residual_dof


def noise_floor(values: np.ndarray) -> float:
    """Robust per-sample noise estimate from first differences."""
    diffs = np.diff(np.asarray(values, dtype=float))
    return 1.4826 * np.median(np.abs(diffs)) / np.sqrt(2.0)


def _half_max_width(x, y, peak):
    level = 0.5 * (y[peak] + np.min(y))  # halfway down to the baseline
    left = peak
    while left > 0 and y[left] > level:
        left -= 1
    right = peak
    while right < y.size - 1 and y[right] > level:
        right += 1
    return max(x[right] - x[left], x[1] - x[0])


def fit_lorentzian(x: np.ndarray, y: np.ndarray,
                   init: tuple | None = None) -> PeakFit:
    """Single Lorentzian peak fit with analytic Jacobian."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if init is None:
        peak = int(np.argmax(y))
        offset0 = float(np.min(y))
        init = (x[peak], _half_max_width(x, y, peak), y[peak] - offset0, offset0)

    def residual(p):
        return _lorentz(x, *p) - y

    def jac(p):
        return _lorentz_jacobian(x, *p)

    result = least_squares(residual, init, jac=jac, xtol=STEP_TOLERANCE,
                           ftol=None, gtol=None, max_nfev=MAX_ITERATIONS * 4)
    if not result.success:
        raise FitError(f"Lorentzian fit did not converge: {result.message}")
    center, fwhm, amplitude, offset = result.x
    model = _lorentz(x, *result.x)
    return PeakFit(center=center, fwhm=abs(fwhm), amplitude=amplitude,
                   offset=offset, r_squared=_r_squared(y, model),
                   covariance=_covariance(result))


def _double_lorentz(x, p):
    center, separation, fwhm, a1, a2, offset = p
    return (offset
            + _lorentz(x, center - separation / 2.0, fwhm, a1, 0.0)
            + _lorentz(x, center + separation / 2.0, fwhm, a2, 0.0))


def fit_double_lorentzian(x, y, init):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def residual(p):
        return _double_lorentz(x, p) - y

    result = least_squares(residual, init, xtol=STEP_TOLERANCE, ftol=None,
                           gtol=None, max_nfev=MAX_ITERATIONS * 8)
    if not result.success:
        raise FitError(f"double-Lorentzian fit did not converge: {result.message}")
    return result


def _accepted_chain(times, heights, acceptance):
    """Largest spacing-consistent set of peaks, grown from the tallest."""
    order = np.argsort(times)
    times = times[order]
    heights = heights[order]
    lo, hi = acceptance
    start = int(np.argmax(heights))
    chain = [start]
    # grow to the right
    while True:
        current = chain[-1]
        candidates = [i for i in range(current + 1, times.size)
                      if lo <= times[i] - times[current] <= hi]
        if not candidates:
            break
        chain.append(max(candidates, key=lambda i: heights[i]))
    # grow to the left
    while True:
        current = chain[0]
        candidates = [i for i in range(current)
                      if lo <= times[current] - times[i] <= hi]
        if not candidates:
            break
        chain.insert(0, max(candidates, key=lambda i: heights[i]))
    return [order[i] for i in chain]


def detect_fundamental_modes(trace, acceptance_s: tuple[float, float] | None = None,
                             prominence_factor: float = 5.0) -> list[PeakWindow]:
    """Windows around the fundamental modes of the better sweep half.

    Only peaks in the central 80 % of a sweep half are considered (the
    turnarounds are distorted by the piezo) and consecutive spacings
    must lie inside the acceptance interval, which rejects higher-order
    modes. Raises ModeDetectionError when fewer than two fundamentals
    survive.
    """
    t = trace.time_s
    v = trace.voltage_v
    if t.size == 0:
        raise ModeDetectionError("no peaks: empty trace")
    period = 1.0 / trace.sweep_hz
    prominence = max(prominence_factor * noise_floor(v), 1e-3 * (np.ptp(v) or 1.0))

    best = []
    for half in (0, 1):
        t0, t1 = half * period / 2.0, (half + 1) * period / 2.0
        central = (t >= t0 + 0.1 * period / 2.0) & (t <= t1 - 0.1 * period / 2.0)
        idx = np.nonzero(central)[0]
        if idx.size < 3:
            continue
        peaks, _ = find_peaks(v[idx], prominence=prominence)
        peaks = idx[peaks]
        if peaks.size < 2:
            continue
        times = t[peaks]
        heights = v[peaks]
        floor = noise_floor(v[idx])
        if floor > 0 and heights.max() - np.median(v[idx]) < 10.0 * floor:
            continue  # nothing stands clearly above the detector noise
        if acceptance_s is None:
            tall = peaks[heights >= 0.5 * heights.max()]
            if tall.size < 2:
                continue
            # a resolved polarization splitting doubles the tall peaks;
            # the fundamental spacing is the large-gap population
            gaps = np.diff(t[tall])
            spacing = float(np.median(gaps[gaps > 0.5 * gaps.max()]))
            window = (0.7 * spacing, 1.3 * spacing)
        else:
            window = acceptance_s
        # sporadic noise spikes clear the prominence cut occasionally;
        # fundamentals are comparable in height to the tallest peak
        keep = heights >= 0.2 * heights.max()
        peaks, times, heights = peaks[keep], times[keep], heights[keep]
        chain = _accepted_chain(times, heights, window)
        if len(chain) > len(best):
            best = [(peaks[i], half) for i in chain]

    if len(best) < 2:
        raise ModeDetectionError(
            "mode distance: fewer than 2 fundamental modes inside the "
            "acceptance window")
    centers = np.array([p for p, _ in best])
    median_spacing = int(np.median(np.diff(np.sort(centers))))
    half_window = max(int(0.3 * median_spacing), 5)
    return [PeakWindow(start=max(p - half_window, 0),
                       stop=min(p + half_window + 1, t.size),
                       peak_index=int(p), half=h)
            for p, h in best]


def _fit_mode_window(t, v, window: PeakWindow, resolvability: float = 0.5):
    """Single- vs double-Lorentzian fit of one mode window.

    Returns (center, linewidth, r_squared). The double model wins only
    when it improves R^2 by more than 0.01 and its separation is
    resolvable against the fitted width.
    """
    x = t[window.start:window.stop]
    y = v[window.start:window.stop]
    single = fit_lorentzian(x, y)
    # focus on a few linewidths around the peak; otherwise R^2 measures
    # the empty baseline instead of the fit quality
    core = np.abs(x - single.center) <= 8.0 * single.fwhm
    if 25 <= core.sum() < x.size:
        x, y = x[core], y[core]
        single = fit_lorentzian(x, y)
    # a resolved splitting shows up as two comparable maxima: use their
    # separation to start the double fit, otherwise start barely split
    sub_peaks, _ = find_peaks(y, prominence=0.1 * (np.ptp(y) or 1.0))
    separation0, center0 = 0.7 * single.fwhm, single.center
    if sub_peaks.size >= 2:
        order = sub_peaks[np.argsort(y[sub_peaks])[::-1]]
        if y[order[1]] >= 0.5 * y[order[0]]:
            separation0 = abs(x[order[0]] - x[order[1]])
            center0 = 0.5 * (x[order[0]] + x[order[1]])
    try:
        init = (center0, separation0, single.fwhm,
                single.amplitude, 0.8 * single.amplitude, single.offset)
        result = fit_double_lorentzian(x, y, init)
        center, separation, fwhm, a1, a2, offset = result.x
        r2_double = _r_squared(y, _double_lorentz(x, result.x))
    except FitError:
        r2_double = -np.inf
    if (r2_double - single.r_squared > 0.01
            and abs(separation) > resolvability * abs(fwhm)):
        return center, abs(fwhm), r2_double
    return single.center, single.fwhm, single.r_squared


def fit_finesse(trace, acceptance_s: tuple[float, float] | None = None,
                r2_floor: float = 0.95) -> FinesseResult:
    """Finesse as mode distance over Lorentzian linewidth in sweep time.

    The linewidth comes from the fundamental with the highest R^2
    (earlier peak wins ties); a detected polarization splitting switches
    that peak to a double-Lorentzian fit.
    """
    invalid = FinesseResult(finesse=0.0, mode_distance_s=0.0, linewidth_s=0.0,
                            chosen_peak=-1, valid=False)
    try:
        windows = detect_fundamental_modes(trace, acceptance_s)
    except ModeDetectionError as exc:
        return FinesseResult(**{**invalid.__dict__, "reason": str(exc)})

    fits = []
    for w in windows:
        try:
            fits.append(_fit_mode_window(trace.time_s, trace.voltage_v, w))
        except FitError as exc:
            return FinesseResult(**{**invalid.__dict__,
                                    "reason": f"non-convergence: {exc}"})
    centers = np.array([f[0] for f in fits])
    if centers.size < 2:
        return FinesseResult(**{**invalid.__dict__, "reason": "mode distance"})
    mode_distance = float(np.median(np.diff(np.sort(centers))))
    chosen = max(range(len(fits)), key=lambda i: (fits[i][2], -i))
    linewidth = float(fits[chosen][1])
    r2 = fits[chosen][2]
    if r2 < r2_floor:
        return FinesseResult(finesse=0.0, mode_distance_s=mode_distance,
                             linewidth_s=linewidth, chosen_peak=chosen,
                             valid=False, reason=f"r_squared {r2:.4f} below floor")
    return FinesseResult(finesse=mode_distance / linewidth,
                         mode_distance_s=mode_distance, linewidth_s=linewidth,
                         chosen_peak=chosen, valid=True)


def _sideband_triple(x, center, d_sb, fwhm, amp, amp_sb, offset):
    return (offset
            + _lorentz(x, center, fwhm, amp, 0.0)
            + _lorentz(x, center - d_sb, fwhm, amp_sb, 0.0)
            + _lorentz(x, center + d_sb, fwhm, amp_sb, 0.0))


def _sideband_sextet(x, p):
    center, d_split, d_sb, fwhm, a1, a2, sb_ratio, offset = p
    c1 = center - d_split / 2.0
    c2 = center + d_split / 2.0
    out = np.full_like(x, offset)
    for c, a in ((c1, a1), (c2, a2)):
        out += _lorentz(x, c, fwhm, a, 0.0)
        out += _lorentz(x, c - d_sb, fwhm, sb_ratio * a, 0.0)
        out += _lorentz(x, c + d_sb, fwhm, sb_ratio * a, 0.0)
    return out


def _polarization_window(trace):
    """Samples around the strongest fundamental in the linear (central)
    part of a sweep half, wide enough to include the sidebands of both
    polarization modes. Peaks in the piezo turnaround regions are
    excluded because the time axis is distorted there."""
    v = trace.voltage_v
    t = trace.time_s
    period = 1.0 / trace.sweep_hz
    phase = (t % period) / period
    central = ((phase >= 0.05) & (phase <= 0.45)) | ((phase >= 0.55)
                                                     & (phase <= 0.95))
    prominence = max(5.0 * noise_floor(v), 1e-3 * (np.ptp(v) or 1.0))
    peaks, _ = find_peaks(v, prominence=prominence)
    peaks = peaks[central[peaks]]
    if peaks.size == 0:
        raise ModeDetectionError("no peaks in the linear sweep region")
    tallest = peaks[np.argmax(v[peaks])]
    rivals = peaks[v[peaks] >= 0.6 * v[tallest]]
    rivals = rivals[np.abs(rivals - tallest) > (t.size // 50)]
    if rivals.size:
        radius = int(0.45 * np.min(np.abs(rivals - tallest)))
    else:
        radius = t.size // 10
    # expand symmetrically but never past the central block of this half
    lo = tallest
    while lo > 0 and central[lo - 1] and tallest - lo < radius:
        lo -= 1
    hi = tallest + 1
    while hi < t.size and central[hi] and hi - tallest < radius:
        hi += 1
    return slice(lo, hi)


def fit_polarization(trace, sideband_ghz: float,
                     r2_floor: float = 0.95,
                     resolvability: float = 0.5) -> SplittingResult:
    """Polarization splitting from a sideband-modulated sweep.

    Fits three and six Lorentzians around the strongest fundamental;
    the known sideband frequency converts sweep time to frequency. The
    six-peak model is preferred only when it improves R^2 by more than
    0.01 and the splitting is resolvable; otherwise the mode is
    reported unsplit.
    """
    if sideband_ghz <= 0:
        raise ValueError("sideband_ghz must be positive")
    window = _polarization_window(trace)
    x = trace.time_s[window]
    y = trace.voltage_v[window]

    peak = int(np.argmax(y))
    offset0 = float(np.min(y))
    fwhm0 = _half_max_width(x, y, peak)
    amp0 = y[peak] - offset0
    prominence = max(5.0 * noise_floor(y), 0.02 * amp0)
    sub_peaks, _ = find_peaks(y, prominence=prominence)
    # sidebands are the nearest clearly weaker satellites of the carrier
    weak = sub_peaks[(y[sub_peaks] < 0.6 * y[peak])
                     & (np.abs(x[sub_peaks] - x[peak]) > 1.2 * fwhm0)]
    if weak.size:
        d_sb0 = float(np.min(np.abs(x[weak] - x[peak])))
    else:
        d_sb0 = (x[-1] - x[0]) / 4.0
    # a polarization partner shows up as a second comparably tall peak;
    # the pair midpoint centers the six-peak model
    d_split0 = 0.8 * fwhm0
    mid0 = x[peak]
    if sub_peaks.size >= 2:
        order = sub_peaks[np.argsort(y[sub_peaks])[::-1]]
        if y[order[1]] >= 0.6 * y[order[0]]:
            d_split0 = abs(x[order[0]] - x[order[1]])
            mid0 = 0.5 * (x[order[0]] + x[order[1]])

    def residual_triple(p):
        return _sideband_triple(x, *p) - y

    init3 = (x[peak], d_sb0, fwhm0, amp0, 0.3 * amp0, offset0)
    res3 = least_squares(residual_triple, init3, xtol=STEP_TOLERANCE, ftol=None,
                         gtol=None, max_nfev=MAX_ITERATIONS * 8)
    r2_3 = _r_squared(y, _sideband_triple(x, *res3.x))

    def residual_sextet(p):
        return _sideband_sextet(x, p) - y

    init6 = (mid0, d_split0, d_sb0, fwhm0, amp0, 0.8 * amp0, 0.3, offset0)
    res6 = least_squares(residual_sextet, init6, xtol=STEP_TOLERANCE, ftol=None,
                         gtol=None, max_nfev=MAX_ITERATIONS * 8)
    r2_6 = _r_squared(y, _sideband_sextet(x, res6.x))

    use_six = False
    if res6.success and r2_6 - r2_3 > 0.01:
        _, d_split, d_sb, fwhm = res6.x[:4]
        if abs(d_split) > resolvability * abs(fwhm):
            use_six = True

    if use_six:
        _, d_split, d_sb, fwhm = res6.x[:4]
        ghz_per_s = sideband_ghz / abs(d_sb)
        return SplittingResult(splitting_ghz=abs(d_split) * ghz_per_s,
                               linewidth_ghz=abs(fwhm) * ghz_per_s,
                               resolved=True, r_squared=r2_6)
    ghz_per_s = sideband_ghz / abs(res3.x[1])
    return SplittingResult(splitting_ghz=0.0,
                           linewidth_ghz=abs(res3.x[2]) * ghz_per_s,
                           resolved=False, r_squared=r2_3)


def _gauss(x, center, fwhm, amplitude, offset):
    sigma = fwhm / FWHM_GAUSS
    return offset + amplitude * np.exp(-0.5 * ((x - center) / sigma) ** 2)


def voigt_total_fwhm(fwhm_lorentzian: float, fwhm_gaussian: float) -> float:
    """Olivero-Longbothum width combination (relative error < 0.02 %)."""
    return (0.5346 * fwhm_lorentzian
            + np.sqrt(0.2166 * fwhm_lorentzian ** 2 + fwhm_gaussian ** 2))


def _voigt_peak(x, center, fwhm_gaussian, fwhm_lorentzian, amplitude, offset):
    sigma = max(fwhm_gaussian, 1e-12) / FWHM_GAUSS
    gamma = fwhm_lorentzian / 2.0
    shape = voigt_profile(x - center, sigma, gamma)
    return offset + amplitude * shape / voigt_profile(0.0, sigma, gamma)


def fit_ple_scan(scan, model: str = "lorentzian",
                 lorentzian_floor_mhz: float = 0.0) -> LineshapeFit:
    """Lineshape fit of one PLE scan (freq_mhz, counts).

    For the voigt model the Lorentzian component is bound from below by
    ``lorentzian_floor_mhz`` (the transform limit). Raises FitError on
    non-convergence or a degenerate peak.
    """
    freq, counts = np.asarray(scan[0], float), np.asarray(scan[1], float)
    if freq.size < 20:
        raise FitError("scan needs at least 20 points")
    span = freq[-1] - freq[0]
    peak = int(np.argmax(counts))
    offset0 = float(np.min(counts))
    amp0 = counts[peak] - offset0
    fwhm0 = _half_max_width(freq, counts, peak)
    if amp0 <= 0:
        raise FitError("degenerate peak: no contrast above the background")

    if model == "lorentzian":
        fit = fit_lorentzian(freq, counts,
                             init=(freq[peak], fwhm0, amp0, offset0))
        result = LineshapeFit(model=model, center_mhz=fit.center,
                              fwhm_total_mhz=fit.fwhm,
                              fwhm_lorentzian_mhz=fit.fwhm,
                              fwhm_gaussian_mhz=0.0, amplitude=fit.amplitude,
                              offset=fit.offset, r_squared=fit.r_squared,
                              stderr=_stderr_from_cov(
                                  fit.covariance,
                                  ["center_mhz", "fwhm_total_mhz", "amplitude",
                                   "offset"]))
    elif model == "gaussian":
        def residual(p):
            return _gauss(freq, *p) - counts

        res = least_squares(residual, (freq[peak], fwhm0, amp0, offset0),
                            xtol=STEP_TOLERANCE, ftol=None, gtol=None,
                            max_nfev=MAX_ITERATIONS * 8)
        if not res.success:
            raise FitError(f"gaussian fit did not converge: {res.message}")
        center, fwhm, amplitude, offset = res.x
        result = LineshapeFit(model=model, center_mhz=center,
                              fwhm_total_mhz=abs(fwhm),
                              fwhm_lorentzian_mhz=0.0,
                              fwhm_gaussian_mhz=abs(fwhm), amplitude=amplitude,
                              offset=offset,
                              r_squared=_r_squared(counts, _gauss(freq, *res.x)),
                              stderr=_stderr_from_cov(
                                  _covariance(res),
                                  ["center_mhz", "fwhm_total_mhz", "amplitude",
                                   "offset"]))
    elif model == "voigt":
        def residual(p):
            return _voigt_peak(freq, *p) - counts

        gauss0 = max(np.sqrt(max(fwhm0 ** 2 - lorentzian_floor_mhz ** 2, 0.0)),
                     0.1 * fwhm0)
        init = (freq[peak], gauss0, max(lorentzian_floor_mhz, 0.3 * fwhm0),
                amp0, offset0)
        lower = (freq[0], 1e-6, lorentzian_floor_mhz, 0.0, -np.inf)
        upper = (freq[-1], 10.0 * span, 10.0 * span, np.inf, np.inf)
        res = least_squares(residual, init, bounds=(lower, upper),
                            xtol=STEP_TOLERANCE, ftol=None, gtol=None,
                            max_nfev=MAX_ITERATIONS * 8)
        if not res.success:
            raise FitError(f"voigt fit did not converge: {res.message}")
        center, fwhm_g, fwhm_l, amplitude, offset = res.x
        result = LineshapeFit(model=model, center_mhz=center,
                              fwhm_total_mhz=voigt_total_fwhm(fwhm_l, fwhm_g),
                              fwhm_lorentzian_mhz=fwhm_l,
                              fwhm_gaussian_mhz=fwhm_g, amplitude=amplitude,
                              offset=offset,
                              r_squared=_r_squared(counts,
                                                   _voigt_peak(freq, *res.x)),
                              stderr=_stderr_from_cov(
                                  _covariance(res),
                                  ["center_mhz", "fwhm_gaussian_mhz",
                                   "fwhm_lorentzian_mhz", "amplitude",
                                   "offset"]))
    else:
        raise ValueError(f"unknown lineshape model {model!r}")

    if result.fwhm_total_mhz > 2.0 * span:
        raise FitError(
            f"degenerate peak: fitted width {result.fwhm_total_mhz:.1f} MHz "
            f"exceeds twice the scan span {span:.1f} MHz; residual rms "
            f"{np.std(counts):.2f}")
    return result


def _stderr_from_cov(cov, names):
    if cov is None:
        return {}
    return {name: float(np.sqrt(max(cov[i, i], 0.0)))
            for i, name in enumerate(names)}


def spectral_diffusion_average(scans, selection_fraction_min: float = 0.5,
                               r2_floor: float = 0.8):
    """Spectral diffusion and pure dephasing widths of a PLE scan set.

    The plain average of all scans is fitted with a Gaussian (slow
    diffusion); scans whose fitted Lorentzian peak lies fully inside
    the scan range and clears the R^2 floor are centered and averaged,
    then fitted with a Lorentzian (fast dephasing). Warns if fewer than
    ``selection_fraction_min`` of the scans pass the selection.
    """
    if len(scans.scans) < 10:
        raise ValueError("need at least 10 scans")
    base_freq = scans.scans[0][0]
    stacked = np.vstack([np.interp(base_freq, f, c) for f, c in scans.scans])
    mean_scan = stacked.mean(axis=0)
    gaussian_fit = fit_ple_scan((base_freq, mean_scan), model="gaussian")

    selected = []
    for freq, counts in scans.scans:
        try:
            fit = fit_ple_scan((freq, counts), model="lorentzian")
        except FitError:
            continue
        inside = (freq[0] <= fit.center_mhz - fit.fwhm_total_mhz
                  and fit.center_mhz + fit.fwhm_total_mhz <= freq[-1])
        if inside and fit.r_squared >= r2_floor:
            selected.append((freq, counts, fit.center_mhz))
    if not selected:
        raise FitError("no scan passed the completeness selection")
    fraction = len(selected) / len(scans.scans)
    if fraction < selection_fraction_min:
        warnings.warn(f"only {fraction:.0%} of scans passed the completeness "
                      f"selection (minimum {selection_fraction_min:.0%})")

    relative = base_freq - base_freq[base_freq.size // 2]
    centered = np.vstack([np.interp(relative, f - c0, c)
                          for f, c, c0 in selected])
    dephasing_fit = fit_ple_scan((relative, centered.mean(axis=0)),
                                 model="lorentzian")
    return gaussian_fit, dephasing_fit, len(selected)


def ple_statistics(fits) -> dict:
    """Order statistics and CDF of fitted linewidths.

    Accepts LineshapeFit objects or plain widths (MHz).
    """
    values = np.array([f.fwhm_total_mhz if isinstance(f, LineshapeFit) else float(f)
                       for f in fits])
    if values.size == 0:
        raise ValueError("no fits given")
    ordered = np.sort(values)
    cdf = [(float(v), float(i + 1) / ordered.size)
           for i, v in enumerate(ordered)]
    return {
        "count": int(ordered.size),
        "median_mhz": float(np.median(ordered)),
        "min_mhz": float(ordered[0]),
        "max_mhz": float(ordered[-1]),
        "cdf": cdf,
    }
