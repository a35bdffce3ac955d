"""Minimal SVG rendering of a posterior density with HPD shading.

Deliberately dependency-free: the output is a static display (density curve,
shaded HPD segments, tick marks at the point estimates), so a small string
builder beats pulling in a plotting stack.
"""

from __future__ import annotations

from .posterior import PosteriorGrid
from .summarize import ExtremaReport, HpdResult

_W, _H = 860.0, 380.0
_MARGIN = 40.0


def _sx(t: float, t_lo: float, t_hi: float) -> float:
    return _MARGIN + (t - t_lo) / (t_hi - t_lo) * (_W - 2 * _MARGIN)


def _sy(d: float, d_max: float) -> float:
    return _H - _MARGIN - d / d_max * (_H - 2 * _MARGIN)


def render_density_svg(grid: PosteriorGrid, hpd: HpdResult,
                       report: ExtremaReport, comment: str = "") -> str:
    """Return a complete SVG document as a string."""
    t_lo, t_hi = grid.t_lo, grid.t_hi
    d_max = float(grid.density.max()) or 1.0
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {_W:g} {_H:g}">',
    ]
    if comment:
        parts.append(f"<!-- {comment} -->")
    parts.append(f'<rect width="{_W:g}" height="{_H:g}" fill="white"/>')

    for (lo, hi), boundary in zip(hpd.segments, hpd.boundary_flags):
        x0, x1 = _sx(lo, t_lo, t_hi), _sx(hi, t_lo, t_hi)
        fill = "#f4c27a" if boundary else "#9ecae1"
        parts.append(
            f'<rect x="{x0:.2f}" y="{_MARGIN:.2f}" width="{x1 - x0:.2f}" '
            f'height="{_H - 2 * _MARGIN:.2f}" fill="{fill}" opacity="0.45"/>'
        )

    pts = " ".join(
        f"{_sx(t, t_lo, t_hi):.2f},{_sy(d, d_max):.2f}"
        for t, d in zip(grid.ts, grid.density)
    )
    parts.append(f'<polyline points="{pts}" fill="none" stroke="#08519c" '
                 'stroke-width="1.5"/>')

    for est in report.estimates:
        x = _sx(est.t_hat, t_lo, t_hi)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_H - _MARGIN:.2f}" x2="{x:.2f}" '
            f'y2="{_MARGIN:.2f}" stroke="#de2d26" stroke-width="1" '
            'stroke-dasharray="4,3"/>'
        )

    # axis line and extreme tick labels
    parts.append(
        f'<line x1="{_MARGIN:g}" y1="{_H - _MARGIN:g}" x2="{_W - _MARGIN:g}" '
        f'y2="{_H - _MARGIN:g}" stroke="black" stroke-width="1"/>'
    )
    for t in (t_lo, t_hi):
        x = _sx(t, t_lo, t_hi)
        parts.append(
            f'<text x="{x:.2f}" y="{_H - _MARGIN + 18:.2f}" font-size="12" '
            f'text-anchor="middle">{t:.3f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
