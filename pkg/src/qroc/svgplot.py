"""Minimal deterministic SVG line plots.

Output is plain SVG 1.1 text with fixed-precision coordinates and no
timestamps or generator metadata, so identical inputs give identical
bytes.  Only what the reports need: polylines, step curves, a shaded
band polygon, axes with 1-2-5 ticks, and a legend.
"""

import math
from dataclasses import dataclass, field

__all__ = ["Series", "svg_plot"]

_W, _H = 640.0, 480.0
_ML, _MR, _MT, _MB = 64.0, 20.0, 34.0, 56.0
_PW = _W - _ML - _MR
_PH = _H - _MT - _MB

_FONT = 'font-family="Helvetica,Arial,sans-serif"'


@dataclass
class Series:
    """One curve: points, label, and drawing style.

    kind is "line" (joined as given) or "step" (right-continuous jumps
    inserted between points).
    """

    x: tuple
    y: tuple
    label: str = ""
    color: str = "#000000"
    kind: str = "line"
    dash: str = ""
    width: float = 1.6


def _ticks(lo, hi, target=6):
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    mag = 10.0 ** math.floor(math.log10(raw))
    step = 10.0 * mag
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if mult * mag >= raw:
            step = mult * mag
            break
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    t = first
    while t <= hi + 1e-9 * span:
        out.append(round(t, 10) + 0.0)
        t += step
    return out


def _fmt_tick(v):
    s = f"{v:g}"
    return "0" if s == "-0" else s


def _limits(series, band, xlim, ylim):
    xs, ys = [], []
    for s in series:
        xs.extend(s.x)
        ys.extend(s.y)
    if band is not None:
        bx, blo, bhi = band
        xs.extend(bx)
        ys.extend(blo)
        ys.extend(bhi)
    if xlim is None:
        lo, hi = min(xs), max(xs)
        pad = 0.04 * (hi - lo) if hi > lo else 0.5
        xlim = (lo - pad, hi + pad)
    if ylim is None:
        lo, hi = min(ys), max(ys)
        pad = 0.04 * (hi - lo) if hi > lo else 0.5
        ylim = (lo - pad, hi + pad)
    return xlim, ylim


def _step_points(x, y):
    px, py = [x[0]], [y[0]]
    for i in range(1, len(x)):
        px.append(x[i])
        py.append(y[i - 1])
        px.append(x[i])
        py.append(y[i])
    return px, py


def svg_plot(path, series, *, title="", xlabel="", ylabel="",
             xlim=None, ylim=None, band=None, legend=True):
    """Write a line plot to an SVG file.

    band, if given, is (x, lower, upper) drawn as a shaded region
    behind the curves.  Returns the SVG text as well.
    """
    series = list(series)
    if not series and band is None:
        raise ValueError("nothing to plot")
    (x0, x1), (y0, y1) = _limits(series, band, xlim, ylim)

    def tx(v):
        return _ML + (v - x0) / (x1 - x0) * _PW

    def ty(v):
        return _MT + (y1 - v) / (y1 - y0) * _PH

    def pts(xv, yv):
        return " ".join(f"{tx(a):.2f},{ty(b):.2f}" for a, b in zip(xv, yv))

    out = []
    out.append('<?xml version="1.0" encoding="UTF-8"?>')
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W:g}" '
               f'height="{_H:g}" viewBox="0 0 {_W:g} {_H:g}">')
    out.append(f'<rect x="0" y="0" width="{_W:g}" height="{_H:g}" fill="#ffffff"/>')
    if title:
        out.append(f'<text x="{_W / 2:.2f}" y="22" {_FONT} font-size="15" '
                   f'text-anchor="middle">{_esc(title)}</text>')

    # clip curves to the plot area
    out.append(f'<clipPath id="plot"><rect x="{_ML:.2f}" y="{_MT:.2f}" '
               f'width="{_PW:.2f}" height="{_PH:.2f}"/></clipPath>')

    # gridlines and ticks
    for t in _ticks(x0, x1):
        px = tx(t)
        out.append(f'<line x1="{px:.2f}" y1="{_MT:.2f}" x2="{px:.2f}" '
                   f'y2="{_MT + _PH:.2f}" stroke="#e0e0e0" stroke-width="1"/>')
        out.append(f'<text x="{px:.2f}" y="{_MT + _PH + 18:.2f}" {_FONT} '
                   f'font-size="12" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _ticks(y0, y1):
        py = ty(t)
        out.append(f'<line x1="{_ML:.2f}" y1="{py:.2f}" x2="{_ML + _PW:.2f}" '
                   f'y2="{py:.2f}" stroke="#e0e0e0" stroke-width="1"/>')
        out.append(f'<text x="{_ML - 8:.2f}" y="{py + 4:.2f}" {_FONT} '
                   f'font-size="12" text-anchor="end">{_fmt_tick(t)}</text>')

    out.append('<g clip-path="url(#plot)">')
    if band is not None:
        bx, blo, bhi = band
        poly = pts(list(bx) + list(bx)[::-1], list(blo) + list(bhi)[::-1])
        out.append(f'<polygon points="{poly}" fill="#9ecae1" fill-opacity="0.45" '
                   'stroke="none"/>')
    for s in series:
        xv, yv = (list(s.x), list(s.y))
        if len(xv) != len(yv) or not xv:
            raise ValueError(f"series {s.label!r} has bad coordinates")
        if s.kind == "step" and len(xv) > 1:
            xv, yv = _step_points(xv, yv)
        dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
        out.append(f'<polyline points="{pts(xv, yv)}" fill="none" '
                   f'stroke="{s.color}" stroke-width="{s.width:g}"{dash}/>')
    out.append('</g>')

    # frame
    out.append(f'<rect x="{_ML:.2f}" y="{_MT:.2f}" width="{_PW:.2f}" '
               f'height="{_PH:.2f}" fill="none" stroke="#000000" stroke-width="1"/>')
    if xlabel:
        out.append(f'<text x="{_ML + _PW / 2:.2f}" y="{_H - 14:.2f}" {_FONT} '
                   f'font-size="13" text-anchor="middle">{_esc(xlabel)}</text>')
    if ylabel:
        cx, cy = 18.0, _MT + _PH / 2
        out.append(f'<text x="{cx:.2f}" y="{cy:.2f}" {_FONT} font-size="13" '
                   f'text-anchor="middle" transform="rotate(-90 {cx:.2f} '
                   f'{cy:.2f})">{_esc(ylabel)}</text>')

    labeled = [s for s in series if s.label]
    if legend and labeled:
        lx, ly = _ML + 12.0, _MT + 12.0
        row = 17.0
        box_h = row * len(labeled) + 10.0
        box_w = 12.0 + 26.0 + 6.0 + 7.0 * max(len(s.label) for s in labeled) + 10.0
        out.append(f'<rect x="{lx:.2f}" y="{ly:.2f}" width="{box_w:.2f}" '
                   f'height="{box_h:.2f}" fill="#ffffff" fill-opacity="0.85" '
                   'stroke="#cccccc" stroke-width="1"/>')
        for i, s in enumerate(labeled):
            yy = ly + 8.0 + row * i + row / 2
            dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
            out.append(f'<line x1="{lx + 8:.2f}" y1="{yy:.2f}" x2="{lx + 34:.2f}" '
                       f'y2="{yy:.2f}" stroke="{s.color}" '
                       f'stroke-width="{s.width:g}"{dash}/>')
            out.append(f'<text x="{lx + 40:.2f}" y="{yy + 4:.2f}" {_FONT} '
                       f'font-size="12">{_esc(s.label)}</text>')

    out.append('</svg>')
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _esc(s):
    return (str(s).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))
