"""Toolkit for fiber microcavities with thin diamond membranes:
loss model, synthetic scanning-cavity datasets, trace and model fitting."""

from .optics import (
    BeamGeometry,
    DiamondSlab,
    FiberTip,
    HybridGeometry,
    LossBreakdown,
    MirrorSet,
    ModeIndex,
    OpticalConstants,
    StabilityError,
    beam_geometry,
    clipping_loss_ppm,
    effective_losses,
    field_intensity_ratio,
    hybrid_resonances,
    mode_thickness_nm,
    outcoupling_efficiency,
    purcell_estimate,
    scattering_loss_ppm,
)
from . import config, formats, modelfit, render, synth, tracefit  # noqa: F401

__all__ = [
    "config",
    "formats",
    "modelfit",
    "render",
    "synth",
    "tracefit",
    "BeamGeometry",
    "DiamondSlab",
    "FiberTip",
    "HybridGeometry",
    "LossBreakdown",
    "MirrorSet",
    "ModeIndex",
    "OpticalConstants",
    "StabilityError",
    "beam_geometry",
    "clipping_loss_ppm",
    "effective_losses",
    "field_intensity_ratio",
    "hybrid_resonances",
    "mode_thickness_nm",
    "outcoupling_efficiency",
    "purcell_estimate",
    "scattering_loss_ppm",
]
