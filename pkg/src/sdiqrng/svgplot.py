"""Minimal deterministic SVG line/scatter plots.

A plot is a pure function of its data table: same series in, byte-same
SVG out.  Supports linear or log axes, point markers, and a legend;
nothing else.  Kept dependency-free so batch runs only write text.
"""

import math

WIDTH, HEIGHT = 720, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 72, 24, 28, 56
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x):
    return f"{x:.6g}"


def _ticks(lo, hi, log_scale):
    if log_scale:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(lo_e, hi_e + 1)]
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * span:
        out.append(round(t, 12))
        t += step
    return out


class Plot:
    """Accumulate series, then render() to an SVG string."""

    def __init__(self, title="", xlabel="", ylabel="", xlog=False, ylog=False):
        self.title = title
        self.xlabel = xlabel
        self.ylabel = ylabel
        self.xlog = xlog
        self.ylog = ylog
        self.series = []

    def add(self, xs, ys, label="", marker=False, dashed=False):
        pts = [
            (float(x), float(y))
            for x, y in zip(xs, ys)
            if _finite(x) and _finite(y)
            and (not self.xlog or x > 0) and (not self.ylog or y > 0)
        ]
        self.series.append((pts, label, marker, dashed))
        return self

    def _range(self, idx, log_scale):
        vals = [p[idx] for pts, *_ in self.series for p in pts]
        if not vals:
            return (0.1, 1.0) if log_scale else (0.0, 1.0)
        lo, hi = min(vals), max(vals)
        if log_scale:
            pad = (hi / lo) ** 0.05 if hi > lo else 2.0
            return lo / pad, hi * pad
        pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.1
        return lo - pad, hi + pad

    def render(self):
        xlo, xhi = self._range(0, self.xlog)
        ylo, yhi = self._range(1, self.ylog)

        def sx(x):
            if self.xlog:
                t = (math.log10(x) - math.log10(xlo)) / (math.log10(xhi) - math.log10(xlo))
            else:
                t = (x - xlo) / (xhi - xlo)
            return MARGIN_L + t * (WIDTH - MARGIN_L - MARGIN_R)

        def sy(y):
            if self.ylog:
                t = (math.log10(y) - math.log10(ylo)) / (math.log10(yhi) - math.log10(ylo))
            else:
                t = (y - ylo) / (yhi - ylo)
            return HEIGHT - MARGIN_B - t * (HEIGHT - MARGIN_T - MARGIN_B)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-size="14">{self.title}</text>',
        ]
        # frame
        x0, y0 = MARGIN_L, HEIGHT - MARGIN_B
        x1, y1 = WIDTH - MARGIN_R, MARGIN_T
        out.append(
            f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
            'fill="none" stroke="black"/>'
        )
        for t in _ticks(xlo, xhi, self.xlog):
            if t < xlo or t > xhi:
                continue
            px = sx(t)
            out.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 5}" stroke="black"/>')
            out.append(
                f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle">{_fmt(t)}</text>'
            )
        for t in _ticks(ylo, yhi, self.ylog):
            if t < ylo or t > yhi:
                continue
            py = sy(t)
            out.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
            out.append(
                f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end">{_fmt(t)}</text>'
            )
        out.append(
            f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 16}" text-anchor="middle">{self.xlabel}</text>'
        )
        out.append(
            f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{self.ylabel}</text>'
        )
        for i, (pts, label, marker, dashed) in enumerate(self.series):
            color = PALETTE[i % len(PALETTE)]
            if len(pts) > 1:
                path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
                dash = ' stroke-dasharray="6,4"' if dashed else ""
                out.append(
                    f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>'
                )
            if marker or len(pts) == 1:
                for x, y in pts:
                    out.append(
                        f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>'
                    )
            if label:
                ly = MARGIN_T + 16 + 16 * i
                out.append(
                    f'<line x1="{x1 - 150}" y1="{ly - 4}" x2="{x1 - 120}" y2="{ly - 4}" '
                    f'stroke="{color}" stroke-width="2"/>'
                )
                out.append(f'<text x="{x1 - 114}" y="{ly}">{label}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _finite(v):
    try:
        return math.isfinite(float(v))
    except (TypeError, ValueError):
        return False
