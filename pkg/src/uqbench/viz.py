"""Hand-rolled SVG emitters.

Deliberately dependency-free and deterministic: fixed float formatting, no
timestamps or generator metadata, so identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import numpy as np

__all__ = ["toy_svg", "curve_svg"]


def _f(v) -> str:
    return f"{float(v):.2f}"


def _polyline(xs, ys, stroke, width="1.5", dash=None, opacity=None):
    pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    if opacity:
        extra += f' stroke-opacity="{opacity}"'
    return (
        f'<polyline fill="none" stroke="{stroke}" stroke-width="{width}"{extra} '
        f'points="{pts}"/>'
    )


def _band(xs, upper, lower, fill, opacity):
    pts = [f"{_f(x)},{_f(y)}" for x, y in zip(xs, upper)]
    pts += [f"{_f(x)},{_f(y)}" for x, y in zip(xs[::-1], lower[::-1])]
    return f'<polygon fill="{fill}" fill-opacity="{opacity}" points="{" ".join(pts)}"/>'


class _Axes:
    """Linear data-to-pixel mapping inside a panel rectangle."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim, self.ylim = xlim, ylim

    def px(self, x):
        t = (np.asarray(x, dtype=float) - self.xlim[0]) / (self.xlim[1] - self.xlim[0])
        return self.x0 + t * self.w

    def py(self, y):
        t = (np.asarray(y, dtype=float) - self.ylim[0]) / (self.ylim[1] - self.ylim[0])
        return self.y0 + self.h - t * self.h


def toy_svg(run, width: int = 880, panel_height: int = 190) -> str:
    """One panel per method: true curve, samples, mean, 1 and 2 sigma bands."""
    names = list(run.results)
    margin_l, margin_r, margin_t, margin_b = 50, 14, 26, 20
    total_h = len(names) * panel_height + margin_b
    ds = run.dataset
    ylo = float(ds.plot_f.min()) - 1.8
    yhi = float(ds.plot_f.max()) + 1.8
    xlim = (float(ds.plot_x.min()), float(ds.plot_x.max()))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{total_h}" viewBox="0 0 {width} {total_h}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    samples = slice(None, None, 8)  # thin the 875 train points for legibility
    for row, name in enumerate(names):
        result = run.results[name]
        top = row * panel_height + margin_t
        ax = _Axes(
            margin_l,
            top,
            width - margin_l - margin_r,
            panel_height - margin_t - 8,
            xlim,
            (ylo, yhi),
        )
        clip = f"panel{row}"
        parts.append(
            f'<clipPath id="{clip}"><rect x="{ax.x0}" y="{ax.y0}" '
            f'width="{ax.w}" height="{ax.h}"/></clipPath>'
        )
        parts.append(
            f'<rect x="{ax.x0}" y="{ax.y0}" width="{ax.w}" height="{ax.h}" '
            'fill="none" stroke="#888" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{ax.x0 + 6}" y="{top - 8}" font-family="sans-serif" '
            f'font-size="13" fill="#333">{name}</text>'
        )
        est = result.predict(ds.plot_x)
        px = ax.px(ds.plot_x)
        parts.append(f'<g clip-path="url(#{clip})">')
        for z, opacity in ((2.0, "0.25"), (1.0, "0.45")):
            parts.append(
                _band(
                    px,
                    ax.py(est.mean + z * est.sigma),
                    ax.py(est.mean - z * est.sigma),
                    "orange",
                    opacity,
                )
            )
        for bound in (-7.0, 7.0):  # training-domain boundary
            bx = _f(ax.px(bound))
            parts.append(
                f'<line x1="{bx}" y1="{_f(ax.y0)}" x2="{bx}" y2="{_f(ax.y0 + ax.h)}" '
                'stroke="#bbb" stroke-width="1" stroke-dasharray="4,3"/>'
            )
        parts.append(_polyline(px, ax.py(ds.plot_f), "green", "1.8"))
        sx = ax.px(ds.train_x[samples])
        sy = ax.py(ds.train_y[samples])
        for x, y in zip(sx, sy):
            parts.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="1.8" fill="#3366cc"/>')
        parts.append(_polyline(px, ax.py(est.mean), "red", "1.6"))
        parts.append("</g>")
        for tick in (-10, -5, 0, 5, 10):
            tx = _f(ax.px(tick))
            parts.append(
                f'<text x="{tx}" y="{_f(ax.y0 + ax.h + 13)}" font-family="sans-serif" '
                f'font-size="10" fill="#555" text-anchor="middle">{tick}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def curve_svg(result, title: str, width: int = 640, height: int = 420) -> str:
    """Predicted vs oracle sparsification curves for one image."""
    margin_l, margin_r, margin_t, margin_b = 56, 16, 34, 36
    lo = float(min(result.predicted_curve.min(), result.oracle_curve.min()))
    hi = float(max(result.predicted_curve.max(), result.oracle_curve.max()))
    if hi == lo:
        hi = lo + 1.0
    pad = 0.06 * (hi - lo)
    ax = _Axes(
        margin_l,
        margin_t,
        width - margin_l - margin_r,
        height - margin_t - margin_b,
        (float(result.fractions[0]), float(result.fractions[-1])),
        (lo - pad, hi + pad),
    )
    px = ax.px(result.fractions)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{margin_l}" y="20" font-family="sans-serif" font-size="14" '
        f'fill="#333">{title}</text>',
        f'<rect x="{ax.x0}" y="{ax.y0}" width="{ax.w}" height="{ax.h}" '
        'fill="none" stroke="#888" stroke-width="1"/>',
        _polyline(px, ax.py(result.predicted_curve), "red", "1.8"),
        _polyline(px, ax.py(result.oracle_curve), "#3366cc", "1.8", dash="5,3"),
        f'<text x="{width - margin_r - 150}" y="{margin_t + 16}" '
        'font-family="sans-serif" font-size="11" fill="red">predicted</text>',
        f'<text x="{width - margin_r - 150}" y="{margin_t + 30}" '
        'font-family="sans-serif" font-size="11" fill="#3366cc">oracle</text>',
        f'<text x="{(ax.x0 + ax.w / 2):.0f}" y="{height - 8}" '
        'font-family="sans-serif" font-size="11" fill="#555" '
        'text-anchor="middle">fraction removed</text>',
    ]
    for tick in np.linspace(result.fractions[0], result.fractions[-1], 5):
        tx = _f(ax.px(tick))
        parts.append(
            f'<text x="{tx}" y="{_f(ax.y0 + ax.h + 14)}" font-family="sans-serif" '
            f'font-size="10" fill="#555" text-anchor="middle">{tick:.2f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
