"""Self-contained SVG line charts and heightmap previews.

No plotting dependency: charts are written as plain SVG with fixed float
formatting so identical data produces identical bytes.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#1f6fb2", "#d0442c", "#3d8f4e", "#8a58a8", "#b08b2e", "#4fadad"]
WIDTH, HEIGHT = 880, 430
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 42, 52
MAX_POINTS = 2000


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or hi <= lo:
        return [lo]
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    for mult in (1, 2, 2.5, 5, 10):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def line_chart(
    path,
    series: list[tuple[str, np.ndarray, np.ndarray]],
    title: str,
    xlabel: str,
    ylabel: str,
    hlines: list[tuple[float, str]] | None = None,
) -> None:
    """Write a multi-series line chart; series = [(label, x, y), ...]."""
    xs_all = [np.asarray(x, dtype=float) for _, x, _ in series]
    ys_all = [np.asarray(y, dtype=float) for _, _, y in series]
    finite = [np.isfinite(y) for y in ys_all]
    x_lo = min((x.min() for x in xs_all if len(x)), default=0.0)
    x_hi = max((x.max() for x in xs_all if len(x)), default=1.0)
    y_vals = np.concatenate([y[f] for y, f in zip(ys_all, finite)]) if series else np.array([0.0])
    if len(y_vals) == 0:
        y_vals = np.array([0.0])
    y_lo = float(y_vals.min())
    y_hi = float(y_vals.max())
    for y, _ in hlines or []:
        y_lo = min(y_lo, y)
        y_hi = max(y_hi, y)
    if y_hi - y_lo < 1e-12:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    if x_hi - x_lo < 1e-12:
        x_hi = x_lo + 1.0

    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH/2:.0f}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
    ]
    for t in _nice_ticks(x_lo, x_hi):
        parts.append(
            f'<line x1="{_fmt(sx(t))}" y1="{MARGIN_T}" x2="{_fmt(sx(t))}" '
            f'y2="{HEIGHT - MARGIN_B}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{_fmt(sx(t))}" y="{HEIGHT - MARGIN_B + 18}" text-anchor="middle" '
            f'font-size="11">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{_fmt(sy(t))}" x2="{WIDTH - MARGIN_R}" '
            f'y2="{_fmt(sy(t))}" stroke="#dddddd"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 6}" y="{_fmt(sy(t) + 4)}" text-anchor="end" '
            f'font-size="11">{_fmt(t)}</text>'
        )
    parts.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#444444"/>'
    )
    for y, label in hlines or []:
        parts.append(
            f'<line x1="{MARGIN_L}" y1="{_fmt(sy(y))}" x2="{WIDTH - MARGIN_R}" '
            f'y2="{_fmt(sy(y))}" stroke="#999999" stroke-dasharray="6,4"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 4}" y="{_fmt(sy(y) - 5)}" text-anchor="end" '
            f'font-size="11" fill="#666666">{escape(label)}</text>'
        )
    for idx, (label, x, y) in enumerate(series):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        stride = max(1, len(x) // MAX_POINTS)
        x = x[::stride]
        y = y[::stride]
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(sx(xv))},{_fmt(sy(yv))}"
            for xv, yv in zip(x, y)
            if math.isfinite(yv)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = MARGIN_T + 16 + 18 * idx
        parts.append(
            f'<line x1="{WIDTH - MARGIN_R - 150}" y1="{ly - 4}" x2="{WIDTH - MARGIN_R - 122}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{WIDTH - MARGIN_R - 116}" y="{ly}" font-size="12">{escape(label)}</text>'
        )
    parts.append(
        f'<text x="{WIDTH/2:.0f}" y="{HEIGHT - 14}" text-anchor="middle" '
        f'font-size="13">{escape(xlabel)}</text>'
    )
    parts.append(
        f'<text x="18" y="{HEIGHT/2:.0f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 18 {HEIGHT/2:.0f})">{escape(ylabel)}</text>'
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")


def heightmap_preview(path, heights: np.ndarray, title: str, max_cells: int = 64) -> None:
    """Grayscale cell preview of a heightfield, downsampled for size."""
    h = np.asarray(heights, dtype=float)
    sy_step = max(1, h.shape[0] // max_cells)
    sx_step = max(1, h.shape[1] // max_cells)
    h = h[::sy_step, ::sx_step]
    lo, hi = float(h.min()), float(h.max())
    span = hi - lo if hi > lo else 1.0
    ny, nx = h.shape
    cell = max(4, min(12, 640 // max(nx, ny)))
    w_px = nx * cell + 40
    h_px = ny * cell + 60
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w_px}" height="{h_px}" '
        f'viewBox="0 0 {w_px} {h_px}" font-family="sans-serif">',
        f'<rect width="{w_px}" height="{h_px}" fill="white"/>',
        f'<text x="{w_px/2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for iy in range(ny):
        for ix in range(nx):
            shade = int(round(235 * (h[iy, ix] - lo) / span)) + 10
            parts.append(
                f'<rect x="{20 + ix * cell}" y="{36 + (ny - 1 - iy) * cell}" '
                f'width="{cell}" height="{cell}" fill="rgb({shade},{shade},{shade})"/>'
            )
    parts.append(
        f'<text x="{w_px/2:.0f}" y="{h_px - 8}" text-anchor="middle" font-size="11">'
        f"z range [{_fmt(lo)}, {_fmt(hi)}] m</text>"
    )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")
