"""Static SVG rendering of maps.

Hand-rolled, dependency-free and fully deterministic: no timestamps,
no random ids, fixed float formatting.
"""

from __future__ import annotations

import numpy as np

from .formats import _write_csv

# compact perceptual dark-to-light colormap (position, r, g, b)
_COLOR_STOPS = (
    (0.00, 68, 1, 84),
    (0.25, 59, 82, 139),
    (0.50, 33, 145, 140),
    (0.75, 94, 201, 98),
    (1.00, 253, 231, 37),
)


def colormap_rgb(fraction: float) -> tuple[int, int, int]:
    """Linear interpolation between the fixed color stops."""
    f = min(max(float(fraction), 0.0), 1.0)
    for (p0, r0, g0, b0), (p1, r1, g1, b1) in zip(_COLOR_STOPS,
                                                  _COLOR_STOPS[1:]):
        if f <= p1:
            w = 0.0 if p1 == p0 else (f - p0) / (p1 - p0)
            return (round(r0 + w * (r1 - r0)), round(g0 + w * (g1 - g0)),
                    round(b0 + w * (b1 - b0)))
    return _COLOR_STOPS[-1][1:]


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % rgb


def render_heatmap_svg(svg_path, grid, cell_um: float,
                       mask=None, label: str = "",
                       scale_csv_path=None, cell_px: int = 4) -> None:
    """Write a grid as an SVG heatmap; invalid cells are left dark gray.

    When ``scale_csv_path`` is given, a CSV mapping value to color
    (columns value,color) with 11 evenly spaced entries is written too.
    """
    values = np.asarray(grid, dtype=float)
    if values.ndim != 2:
        raise ValueError("grid must be 2D")
    mask = np.ones(values.shape, dtype=bool) if mask is None else \
        np.asarray(mask, dtype=bool)
    shown = values[mask]
    lo = float(shown.min()) if shown.size else 0.0
    hi = float(shown.max()) if shown.size else 1.0
    span = hi - lo if hi > lo else 1.0

    ny, nx = values.shape
    width, height = nx * cell_px, ny * cell_px + 20
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<title>{label or "map"} ({nx} x {ny} cells, '
        f'{cell_um:g} um pitch)</title>',
    ]
    for iy in range(ny):
        for ix in range(nx):
            if mask[iy, ix]:
                color = _hex(colormap_rgb((values[iy, ix] - lo) / span))
            else:
                color = "#303030"
            lines.append(f'<rect x="{ix * cell_px}" y="{iy * cell_px}" '
                         f'width="{cell_px}" height="{cell_px}" '
                         f'fill="{color}"/>')
    lines.append(f'<text x="2" y="{ny * cell_px + 14}" font-size="10" '
                 f'font-family="monospace">{label} range {lo:.6g} .. '
                 f'{hi:.6g}</text>')
    lines.append("</svg>")
    with open(svg_path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")

    if scale_csv_path is not None:
        rows = []
        for i in range(11):
            f = i / 10.0
            rows.append(("%.17g" % (lo + f * span),
                         _hex(colormap_rgb(f))))
        _write_csv(scale_csv_path, ["value", "color"], rows)
