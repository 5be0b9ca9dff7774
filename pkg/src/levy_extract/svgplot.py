"""Minimal standalone SVG line/scatter charts (no plotting dependency)."""

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def _fmt(v):
    return f"{v:.6g}"


def line_chart(series, path, title="", xlabel="", ylabel="", width=640, height=420):
    """Write an SVG chart.

    ``series`` is a list of dicts with keys ``x``, ``y``, ``label`` and
    optional ``style`` ("line" or "points").
    """
    pts = [(x, y) for s in series for x, y in zip(s["x"], s["y"])
           if math.isfinite(x) and math.isfinite(y)]
    if not pts:
        raise ValueError("nothing to plot")
    xmin, xmax = min(p[0] for p in pts), max(p[0] for p in pts)
    ymin, ymax = min(p[1] for p in pts), max(p[1] for p in pts)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0
    pad_l, pad_r, pad_t, pad_b = 60, 20, 40, 50
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(x):
        return pad_l + (x - xmin) / (xmax - xmin) * pw

    def sy(y):
        return pad_t + (1.0 - (y - ymin) / (ymax - ymin)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
           f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="13">'
           f'{escape(xlabel)}</text>',
           f'<text x="15" y="{height / 2}" text-anchor="middle" font-size="13" '
           f'transform="rotate(-90 15 {height / 2})">{escape(ylabel)}</text>']
    for i in range(5):
        xv = xmin + i * (xmax - xmin) / 4
        yv = ymin + i * (ymax - ymin) / 4
        out.append(f'<text x="{_fmt(sx(xv))}" y="{pad_t + ph + 16}" text-anchor="middle" '
                   f'font-size="11">{_fmt(xv)}</text>')
        out.append(f'<text x="{pad_l - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end" '
                   f'font-size="11">{_fmt(yv)}</text>')
    for k, s in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        xy = [(x, y) for x, y in zip(s["x"], s["y"]) if math.isfinite(x) and math.isfinite(y)]
        if s.get("style", "line") == "line":
            d = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in xy)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{d}"/>')
        else:
            for x, y in xy:
                out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = pad_t + 16 + 16 * k
        out.append(f'<rect x="{pad_l + 10}" y="{ly - 9}" width="12" height="4" fill="{color}"/>')
        out.append(f'<text x="{pad_l + 28}" y="{ly}" font-size="12">{escape(s["label"])}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
