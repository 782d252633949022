"""Minimal SVG 1.1 line charts (no plotting dependency)."""

from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart"]

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _ticks(lo, hi, log):
    if log:
        exps = np.arange(np.floor(lo), np.ceil(hi) + 1)
        return [(e, f"1e{int(e)}") for e in exps if lo - 1e-9 <= e <= hi + 1e-9]
    vals = np.linspace(lo, hi, 5)
    return [(v, f"{v:.3g}") for v in vals]


def line_chart(series, title, xlabel="t", ylabel="", logx=False, logy=False):
    """Render ``{label: (x, y)}`` as an SVG document string.

    Nonpositive values are dropped from log-scaled axes.
    """
    prepared = []
    for label, (x, y) in series.items():
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if logx:
            keep &= x > 0
        if logy:
            keep &= y > 0
        x, y = x[keep], y[keep]
        if x.size:
            prepared.append((label, np.log10(x) if logx else x, np.log10(y) if logy else y))
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
    ]
    if prepared:
        xs = np.concatenate([p[1] for p in prepared])
        ys = np.concatenate([p[2] for p in prepared])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if x1 == x0:
            x1 = x0 + 1.0
        if y1 == y0:
            y1 = y0 + 1.0

        def px(v):
            return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

        def py(v):
            return MARGIN["top"] + ph - (v - y0) / (y1 - y0) * ph

        left, bottom = MARGIN["left"], MARGIN["top"] + ph
        parts.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}" '
                     'stroke="black"/>')
        parts.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" '
                     'stroke="black"/>')
        for v, lab in _ticks(x0, x1, logx):
            parts.append(f'<text x="{px(v):.1f}" y="{bottom + 18}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="11">{lab}</text>')
        for v, lab in _ticks(y0, y1, logy):
            parts.append(f'<text x="{left - 6}" y="{py(v) + 4:.1f}" text-anchor="end" '
                         f'font-family="sans-serif" font-size="11">{lab}</text>')
        for i, (label, x, y) in enumerate(prepared):
            color = COLORS[i % len(COLORS)]
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                         f'points="{pts}"/>')
            ly = MARGIN["top"] + 16 * i + 10
            parts.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 30}" '
                         f'y2="{ly}" stroke="{color}" stroke-width="2"/>')
            parts.append(f'<text x="{left + pw + 35}" y="{ly + 4}" font-family="sans-serif" '
                         f'font-size="11">{escape(label)}</text>')
    parts.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                 f'{escape(xlabel)}</text>')
    parts.append(f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12" transform="rotate(-90 16 '
                 f'{MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
