"""Tool configuration: one flat, validated record of every physical
constant and pipeline default, serializable to JSON.

Precedence is resolved by the CLI: command-line flag > config file >
built-in default.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from .optics import FiberTip, MirrorSet, OpticalConstants
from .synth import ScanConfig


@dataclass(frozen=True)
class ToolConfig:
    # probe and materials
    wavelength_nm: float = 637.0
    n_diamond: float = 2.41
    # mirror coating losses (diamond-terminated sample mirror)
    loss_fiber_ppm: float = 50.0
    loss_sample_diamond_ppm: float = 670.0
    # fiber tip and sweep
    roc_um: float = 17.3
    sideband_ghz: float = 6.0
    scan_step_um: float = 0.2
    sweep_hz: float = 300.0
    cavity_length_um: float = 5.0
    samples_per_trace: int = 100_000
    noise_rms_v: float = 0.002
    # analysis defaults
    segment_nm: float = 10.0
    histogram_bin: int = 100
    r2_floor: float = 0.95
    nv_lorentzian_floor_mhz: float = 13.0
    # synthetic device defaults (laser-cut-like wedge)
    extent_um: tuple = (70.0, 70.0)
    base_thickness_um: float = 2.3
    wedge_slope_um_per_100um: float = 0.7
    roughness_mean_nm: float = 0.9
    roughness_spread_nm: float = 0.0
    loss_additional_ppm: float = 610.0
    seed: int = 0

    def __post_init__(self):
        positive = ("wavelength_nm", "roc_um", "scan_step_um", "sweep_hz",
                    "cavity_length_um", "segment_nm", "sideband_ghz")
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        nonnegative = ("loss_fiber_ppm", "loss_sample_diamond_ppm",
                       "noise_rms_v", "base_thickness_um",
                       "roughness_mean_nm", "roughness_spread_nm",
                       "loss_additional_ppm", "nv_lorentzian_floor_mhz")
        for name in nonnegative:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.n_diamond <= 1:
            raise ValueError("n_diamond must exceed 1")
        if not 0.0 < self.r2_floor <= 1.0:
            raise ValueError("r2_floor must lie in (0, 1]")
        if self.histogram_bin < 2:
            raise ValueError("histogram_bin must be at least 2")
        if self.samples_per_trace < 1000:
            raise ValueError("samples_per_trace must be at least 1000")
        extent = tuple(float(v) for v in self.extent_um)
        if len(extent) != 2 or extent[0] <= 0 or extent[1] <= 0:
            raise ValueError("extent_um must be two positive lengths")
        object.__setattr__(self, "extent_um", extent)

    # -- serialization -------------------------------------------------
    def to_json(self) -> str:
        record = dataclasses.asdict(self)
        record["extent_um"] = list(record["extent_um"])
        return json.dumps(record, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ToolConfig":
        record = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(record) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**record)

    @classmethod
    def from_file(cls, path) -> "ToolConfig":
        with open(path, encoding="utf-8") as handle:
            return cls.from_json(handle.read())

    def with_overrides(self, **overrides) -> "ToolConfig":
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return dataclasses.replace(self, **overrides)

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]

    # -- views onto the physics modules --------------------------------
    def optical_constants(self) -> OpticalConstants:
        return OpticalConstants(wavelength_nm=self.wavelength_nm,
                                n_diamond=self.n_diamond)

    def mirror_set(self) -> MirrorSet:
        return MirrorSet(loss_fiber_ppm=self.loss_fiber_ppm,
                         loss_sample_ppm=self.loss_sample_diamond_ppm)

    def fiber_tip(self, feature_diameter_um: float = 8.0) -> FiberTip:
        return FiberTip(roc_um=self.roc_um,
                        feature_diameter_um=feature_diameter_um)

    def scan_config(self) -> ScanConfig:
        return ScanConfig(step_um=self.scan_step_um, sweep_hz=self.sweep_hz,
                          samples_per_trace=self.samples_per_trace,
                          cavity_length_um=self.cavity_length_um,
                          sideband_ghz=self.sideband_ghz,
                          noise_rms_v=self.noise_rms_v, seed=self.seed)
