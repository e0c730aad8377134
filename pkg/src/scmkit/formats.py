"""CSV/JSON dataset formats.

All files are UTF-8 CSV with mandatory headers; numeric fields are
written at 17 significant digits so write-then-read is lossless.
Schema violations raise FormatError naming file, line and column.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

import numpy as np

from .synth import (
    DispersionSpectra,
    FinesseMap,
    HeightMap,
    PLEScanSet,
    TransmissionTrace,
)

FLOAT_FORMAT = "%.17g"

HEIGHTMAP_HEADER = ["x_um", "y_um", "height_um"]
SCANMAP_HEADER = ["x_um", "y_um", "finesse", "linewidth_ghz",
                  "splitting_ghz", "transmission", "valid"]
TRACE_HEADER = ["time_s", "voltage_v"]
SPECTRA_HEADER = ["length_step", "wavelength_nm", "intensity"]
PLE_HEADER = ["scan_id", "freq_mhz", "counts"]
LENGTH_SWEEP_HEADER = ["cavity_length_um", "finesse"]

MANIFEST_KINDS = ("scan", "traces", "spectra", "ple", "heightmap")


class FormatError(ValueError):
    """A dataset file violates its schema."""


@dataclass(frozen=True)
class Manifest:
    kind: str
    files: tuple
    provenance: dict

    def __post_init__(self):
        if self.kind not in MANIFEST_KINDS:
            raise FormatError(f"unknown dataset kind {self.kind!r}")
        object.__setattr__(self, "files", tuple(self.files))


def _open_rows(path, header):
    """Validated (line_number, row) pairs of a CSV file."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            first = next(reader)
        except StopIteration:
            raise FormatError(f"{path}:1: empty file") from None
        if first != header:
            raise FormatError(
                f"{path}:1: expected header {','.join(header)}, "
                f"got {','.join(first)}")
        rows = []
        for number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{number}: expected "
                                  f"{len(header)} columns, got {len(row)}")
            rows.append((number, row))
    return rows


def _parse_float(path, number, row, column, header):
    try:
        return float(row[column])
    except ValueError:
        raise FormatError(
            f"{path}:{number}: column {header[column]!r}: "
            f"not a number: {row[column]!r}") from None


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _grid_from_points(path, x, y, values):
    xs = np.unique(x)
    ys = np.unique(y)
    if xs.size * ys.size != len(values):
        raise FormatError(f"{path}: points do not form a complete "
                          f"{ys.size} x {xs.size} grid")
    pitches = np.diff(xs) if xs.size > 1 else np.diff(ys)
    if pitches.size == 0:
        raise FormatError(f"{path}: single-cell grids are not supported")
    pitch = float(pitches[0])
    if not np.allclose(np.diff(xs), pitch) or not np.allclose(np.diff(ys),
                                                              pitch):
        raise FormatError(f"{path}: grid pitch is not uniform")
    order = np.lexsort((x, y))
    grid = np.asarray(values, dtype=float)[order].reshape(ys.size, xs.size)
    return (float(xs[0]), float(ys[0])), pitch, grid


# -- height maps -------------------------------------------------------

def write_heightmap(path, height: HeightMap) -> None:
    x = height.x_coords_um()
    y = height.y_coords_um()
    rows = [(FLOAT_FORMAT % x[ix], FLOAT_FORMAT % y[iy],
             FLOAT_FORMAT % height.grid_um[iy, ix])
            for iy in range(y.size) for ix in range(x.size)]
    _write_csv(path, HEIGHTMAP_HEADER, rows)


def read_heightmap(path) -> HeightMap:
    rows = _open_rows(path, HEIGHTMAP_HEADER)
    x, y, h = [], [], []
    for number, row in rows:
        x.append(_parse_float(path, number, row, 0, HEIGHTMAP_HEADER))
        y.append(_parse_float(path, number, row, 1, HEIGHTMAP_HEADER))
        value = _parse_float(path, number, row, 2, HEIGHTMAP_HEADER)
        if value < 0:
            raise FormatError(f"{path}:{number}: column 'height_um': "
                              f"negative thickness {value}")
        h.append(value)
    origin, pitch, grid = _grid_from_points(path, np.array(x), np.array(y), h)
    return HeightMap(origin_um=origin, pitch_um=pitch, grid_um=grid,
                     frame="file")


# -- finesse maps ------------------------------------------------------

def write_finesse_map(path, fmap: FinesseMap) -> None:
    x = fmap.x_coords_um()
    y = fmap.y_coords_um()
    rows = []
    for iy in range(y.size):
        for ix in range(x.size):
            rows.append((FLOAT_FORMAT % x[ix], FLOAT_FORMAT % y[iy],
                         FLOAT_FORMAT % fmap.finesse[iy, ix],
                         FLOAT_FORMAT % fmap.linewidth_ghz[iy, ix],
                         FLOAT_FORMAT % fmap.splitting_ghz[iy, ix],
                         FLOAT_FORMAT % fmap.transmission[iy, ix],
                         "1" if fmap.valid[iy, ix] else "0"))
    _write_csv(path, SCANMAP_HEADER, rows)


def read_finesse_map(path) -> FinesseMap:
    rows = _open_rows(path, SCANMAP_HEADER)
    columns = [[] for _ in SCANMAP_HEADER]
    for number, row in rows:
        for c in range(6):
            columns[c].append(_parse_float(path, number, row, c,
                                           SCANMAP_HEADER))
        if row[6] not in ("0", "1"):
            raise FormatError(f"{path}:{number}: column 'valid': "
                              f"expected 0 or 1, got {row[6]!r}")
        columns[6].append(row[6] == "1")
    x, y = np.array(columns[0]), np.array(columns[1])
    origin, pitch, finesse = _grid_from_points(path, x, y, columns[2])
    grids = [_grid_from_points(path, x, y, columns[c])[2] for c in range(3, 7)]
    return FinesseMap(origin_um=origin, pitch_um=pitch, finesse=finesse,
                      linewidth_ghz=grids[0], splitting_ghz=grids[1],
                      transmission=grids[2], valid=grids[3].astype(bool))


# -- sweep traces ------------------------------------------------------

def write_trace(path, trace: TransmissionTrace) -> None:
    rows = zip((FLOAT_FORMAT % t for t in trace.time_s),
               (FLOAT_FORMAT % v for v in trace.voltage_v))
    _write_csv(path, TRACE_HEADER, rows)


def read_trace(path, sweep_hz: float) -> TransmissionTrace:
    """The sweep rate is experiment metadata, carried in the config
    rather than the trace file."""
    rows = _open_rows(path, TRACE_HEADER)
    time_s, voltage = [], []
    for number, row in rows:
        t = _parse_float(path, number, row, 0, TRACE_HEADER)
        if time_s and t <= time_s[-1]:
            raise FormatError(f"{path}:{number}: column 'time_s': "
                              f"time axis not strictly increasing at {t}")
        time_s.append(t)
        voltage.append(_parse_float(path, number, row, 1, TRACE_HEADER))
    return TransmissionTrace(time_s=np.array(time_s),
                             voltage_v=np.array(voltage), sweep_hz=sweep_hz)


# -- white-light spectra ----------------------------------------------

def write_spectra(path, spectra: DispersionSpectra) -> None:
    rows = []
    for step in range(spectra.intensity.shape[0]):
        for j, lam in enumerate(spectra.wavelength_nm):
            rows.append((str(step), FLOAT_FORMAT % lam,
                         FLOAT_FORMAT % spectra.intensity[step, j]))
    _write_csv(path, SPECTRA_HEADER, rows)


def read_spectra(path, air_gap0_nm: float = 0.0,
                 air_gap_step_nm: float = 0.0,
                 instrument_fwhm_nm: float = 0.3) -> DispersionSpectra:
    """The nominal actuator calibration (air gap at step 0 and per-step
    increment) is metadata supplied by the caller; it only seeds the
    dispersion fit."""
    rows = _open_rows(path, SPECTRA_HEADER)
    by_step = {}
    for number, row in rows:
        try:
            step = int(row[0])
        except ValueError:
            raise FormatError(f"{path}:{number}: column 'length_step': "
                              f"not an integer: {row[0]!r}") from None
        lam = _parse_float(path, number, row, 1, SPECTRA_HEADER)
        value = _parse_float(path, number, row, 2, SPECTRA_HEADER)
        by_step.setdefault(step, []).append((lam, value))
    steps = sorted(by_step)
    if steps != list(range(len(steps))):
        raise FormatError(f"{path}: length steps must be contiguous from 0, "
                          f"got {steps}")
    wavelengths = np.array([lam for lam, _ in by_step[0]])
    if np.any(np.diff(wavelengths) <= 0):
        raise FormatError(f"{path}: wavelength axis must be strictly "
                          f"increasing within each step")
    intensity = np.empty((len(steps), wavelengths.size))
    for step in steps:
        lams = np.array([lam for lam, _ in by_step[step]])
        if lams.shape != wavelengths.shape or not np.array_equal(lams,
                                                                 wavelengths):
            raise FormatError(f"{path}: step {step} wavelength axis differs "
                              f"from step 0")
        intensity[step] = [value for _, value in by_step[step]]
    air_gaps = air_gap0_nm + air_gap_step_nm * np.arange(len(steps))
    return DispersionSpectra(air_gaps_nm=air_gaps, wavelength_nm=wavelengths,
                             intensity=intensity,
                             instrument_fwhm_nm=instrument_fwhm_nm,
                             diamond_thickness_nm=float("nan"))


# -- PLE scan sets -----------------------------------------------------

def write_ple(path, scans: PLEScanSet) -> None:
    rows = []
    for scan_id, (freq, counts) in enumerate(scans.scans):
        for f, c in zip(freq, counts):
            rows.append((str(scan_id), FLOAT_FORMAT % f, FLOAT_FORMAT % c))
    _write_csv(path, PLE_HEADER, rows)


def read_ple(path, emitter: str) -> PLEScanSet:
    rows = _open_rows(path, PLE_HEADER)
    by_scan = {}
    for number, row in rows:
        try:
            scan_id = int(row[0])
        except ValueError:
            raise FormatError(f"{path}:{number}: column 'scan_id': "
                              f"not an integer: {row[0]!r}") from None
        freq = _parse_float(path, number, row, 1, PLE_HEADER)
        counts = _parse_float(path, number, row, 2, PLE_HEADER)
        scan = by_scan.setdefault(scan_id, ([], []))
        if scan[0] and freq <= scan[0][-1]:
            raise FormatError(f"{path}:{number}: column 'freq_mhz': "
                              f"frequency axis not strictly increasing")
        scan[0].append(freq)
        scan[1].append(counts)
    scans = [(np.array(by_scan[i][0]), np.array(by_scan[i][1]))
             for i in sorted(by_scan)]
    return PLEScanSet(scans=scans, emitter=emitter)


# -- length sweeps (clipping) -----------------------------------------

def write_length_sweep(path, lengths_um, finesse) -> None:
    rows = zip((FLOAT_FORMAT % l for l in lengths_um),
               (FLOAT_FORMAT % f for f in finesse))
    _write_csv(path, LENGTH_SWEEP_HEADER, rows)


def read_length_sweep(path):
    rows = _open_rows(path, LENGTH_SWEEP_HEADER)
    lengths, finesse = [], []
    for number, row in rows:
        lengths.append(_parse_float(path, number, row, 0,
                                    LENGTH_SWEEP_HEADER))
        finesse.append(_parse_float(path, number, row, 1,
                                    LENGTH_SWEEP_HEADER))
    return np.array(lengths), np.array(finesse)


# -- manifests ---------------------------------------------------------

def write_manifest(path, manifest: Manifest) -> None:
    record = {"kind": manifest.kind, "files": list(manifest.files),
              "provenance": manifest.provenance}
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(record, handle, indent=2, sort_keys=True)
        handle.write("\n")


def read_manifest(path) -> Manifest:
    with open(path, encoding="utf-8") as handle:
        try:
            record = json.load(handle)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON: {exc}") from None
    for key in ("kind", "files", "provenance"):
        if key not in record:
            raise FormatError(f"{path}: missing manifest key {key!r}")
    base = os.path.dirname(os.path.abspath(path))
    missing = [name for name in record["files"]
               if not os.path.exists(os.path.join(base, name))]
    if missing:
        raise FormatError(f"{path}: referenced files missing: {missing}")
    return Manifest(kind=record["kind"], files=tuple(record["files"]),
                    provenance=dict(record["provenance"]))
