"""Minimal SVG line plots: polylines, a frame and min/max tick labels."""

from __future__ import annotations

from xml.sax.saxutils import escape

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def line_plot(series, path, title="", xlabel="", ylabel="", width=640, height=400, faint=False):
    """Write ``series = [(label, xs, ys), ...]`` as polylines to ``path``.

    With ``faint=True`` all series share one thin colour (trajectory fans) and
    no legend is drawn.
    """
    pts = [(x, y) for _, xs, ys in series for x, y in zip(xs, ys)]
    if not pts:
        raise ValueError("nothing to plot")
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
        f'<text x="{width / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {mt + ph / 2})">{escape(ylabel)}</text>',
        f'<text x="{ml}" y="{mt + ph + 16}" text-anchor="middle" font-size="10">{_fmt(x0)}</text>',
        f'<text x="{ml + pw}" y="{mt + ph + 16}" text-anchor="middle" font-size="10">{_fmt(x1)}</text>',
        f'<text x="{ml - 6}" y="{mt + ph}" text-anchor="end" font-size="10">{_fmt(y0)}</text>',
        f'<text x="{ml - 6}" y="{mt + 10}" text-anchor="end" font-size="10">{_fmt(y1)}</text>',
    ]
    for i, (label, xs, ys) in enumerate(series):
        color = "#1f77b4" if faint else COLORS[i % len(COLORS)]
        stroke = 0.6 if faint else 1.5
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{stroke}" points="{coords}"/>'
        )
        if not faint:
            ly = mt + 14 + 14 * i
            out.append(f'<text x="{ml + pw - 8}" y="{ly}" text-anchor="end" font-size="11" '
                       f'fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
