"""Self-contained SVG line charts; no external renderer needed.

Decoration only: CSV files are the canonical outputs and these charts are
never read back by any part of the pipeline.
"""

from __future__ import annotations

from pathlib import Path

_COLORS = ("#2e86ab", "#6fb74d", "#d1495b", "#8d6a9f", "#e8a33d", "#444444")
_W, _H = 640, 400
_ML, _MR, _MT, _MB = 64, 16, 36, 44


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def write_line_chart(path, x, series: dict, title: str = "", xlabel: str = "",
                     ylabel: str = "") -> None:
    """Write one chart with a shared x axis and one polyline per series."""
    x = [float(v) for v in x]
    ys = {name: [float(v) for v in vals] for name, vals in series.items()}
    all_y = [v for vals in ys.values() for v in vals]
    x_lo, x_hi = min(x), max(x)
    y_lo, y_hi = min(all_y), max(all_y)
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad
    span_x = (x_hi - x_lo) or 1.0

    def px(v):
        return _ML + (v - x_lo) / span_x * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (v - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    for tx in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{px(tx):.1f}" y1="{_H - _MB}" x2="{px(tx):.1f}" '
                     f'y2="{_H - _MB + 4}" stroke="#333"/>')
        parts.append(f'<text x="{px(tx):.1f}" y="{_H - _MB + 17}" text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{_ML - 4}" y1="{py(ty):.1f}" x2="{_ML}" y2="{py(ty):.1f}" stroke="#333"/>')
        parts.append(f'<text x="{_ML - 8}" y="{py(ty) + 4:.1f}" text-anchor="end">{ty:.3g}</text>')
        parts.append(f'<line x1="{_ML}" y1="{py(ty):.1f}" x2="{_W - _MR}" y2="{py(ty):.1f}" '
                     f'stroke="#eee"/>')
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="#333"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="#333"/>')
    parts.append(f'<text x="{_W / 2}" y="{_H - 8}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{_H / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {_H / 2})">{ylabel}</text>')
    for i, (name, vals) in enumerate(ys.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, vals))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MR - 6}" y="{_MT + 16 * i + 8}" text-anchor="end" '
                     f'fill="{color}">{name}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
