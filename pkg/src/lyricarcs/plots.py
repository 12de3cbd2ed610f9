"""Self-contained SVG line plots of aggregate cluster shapes.

No external fonts, no timestamps; output is byte-deterministic for a given
shape so reruns with the same seed produce identical files.
"""

from __future__ import annotations

import numpy as np

from .clustering import AggregateShape

WIDTH, HEIGHT = 800, 400
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 60, 20, 30, 40


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _polyline(xs, ys, stroke, dashed=False, width=1.5) -> str:
    pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs, ys))
    dash = ' stroke-dasharray="6,4"' if dashed else ""
    return (f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"'
            f'{dash} points="{pts}"/>')


def shape_svg(shape: AggregateShape, lexicon: str, seed: int, version: str,
              ci_color: str = "#cc3333") -> str:
    """Render one cluster shape: solid center line, colored dashed 99% CI
    lines (mean shapes only), black dashed +/- 1 SD lines."""
    curves = [shape.center, shape.sd_low, shape.sd_high]
    if shape.ci99_low is not None:
        curves += [shape.ci99_low, shape.ci99_high]
    lo = min(float(np.min(c)) for c in curves)
    hi = max(float(np.max(c)) for c in curves)
    lo, hi = min(lo, 0.0), max(hi, 0.0)
    pad = 0.05 * (hi - lo) if hi > lo else 0.1
    lo, hi = lo - pad, hi + pad

    n = len(shape.center)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
    xs = MARGIN_LEFT + plot_w * np.arange(n) / (n - 1)

    def y_px(vals):
        return MARGIN_TOP + plot_h * (hi - np.asarray(vals)) / (hi - lo)

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<!-- lexicon={lexicon} seed={seed} version={version} -->",
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{lexicon} cluster {shape.cluster_id} '
        f'({shape.stat}, n={shape.n}, share={shape.share:.2f})</text>',
    ]
    # zero line and axes
    y0 = float(y_px([0.0])[0])
    parts.append(_polyline([MARGIN_LEFT, WIDTH - MARGIN_RIGHT], [y0, y0],
                           "#999999", width=0.8))
    parts.append(_polyline([MARGIN_LEFT, MARGIN_LEFT],
                           [MARGIN_TOP, HEIGHT - MARGIN_BOTTOM], "#000000", width=1.0))
    parts.append(_polyline([MARGIN_LEFT, WIDTH - MARGIN_RIGHT],
                           [HEIGHT - MARGIN_BOTTOM, HEIGHT - MARGIN_BOTTOM],
                           "#000000", width=1.0))
    parts.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">narrative time (%)</text>')
    for frac, label in ((0.0, _fmt(hi)), (1.0, _fmt(lo))):
        ypix = MARGIN_TOP + plot_h * frac
        parts.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{_fmt(ypix + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{label}</text>')

    parts.append(_polyline(xs, y_px(shape.sd_low), "#000000", dashed=True, width=1.0))
    parts.append(_polyline(xs, y_px(shape.sd_high), "#000000", dashed=True, width=1.0))
    if shape.ci99_low is not None:
        parts.append(_polyline(xs, y_px(shape.ci99_low), ci_color, dashed=True, width=1.0))
        parts.append(_polyline(xs, y_px(shape.ci99_high), ci_color, dashed=True, width=1.0))
    parts.append(_polyline(xs, y_px(shape.center), "#1f4e9c", width=2.0))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
