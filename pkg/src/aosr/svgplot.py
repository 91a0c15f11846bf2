"""Minimal deterministic SVG line plots.

Hand-rolled on purpose: identical input must produce identical bytes, so
no plotting library (embedded ids, timestamps, version strings) is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgument

_WIDTH, _HEIGHT = 640, 480
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 20, 50
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class PlotSeries:
    """One named curve; x must be strictly increasing."""

    name: str
    points: tuple[tuple[float, float], ...]
    style: str = "line"  # "line" | "points"

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) == 0:
            raise InvalidArgument(f"series {self.name!r} has no points")
        xs = [x for x, _ in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvalidArgument(f"series {self.name!r}: x must be strictly increasing")
        if self.style not in ("line", "points"):
            raise InvalidArgument(f"unknown style {self.style!r}")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.6g}"


def emit_svg_lines(
    series_list,
    x_label: str,
    y_label: str,
    path: str,
    log_log: bool = False,
) -> None:
    """Write a standalone SVG with one polyline (or dot run) per series."""
    series_list = list(series_list)
    if not series_list:
        raise InvalidArgument("need at least one series")
    for s in series_list:
        if not isinstance(s, PlotSeries):
            raise InvalidArgument("series_list must contain PlotSeries values")

    def tx(v: float) -> float:
        if log_log:
            if v <= 0:
                raise InvalidArgument("log-log plot requires positive coordinates")
            return math.log10(v)
        return v

    pts = [(tx(x), tx(y)) for s in series_list for x, y in s.points]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(v: float) -> float:
        return _MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v: float) -> float:
        return _HEIGHT - _MARGIN_B - (v - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<line x1="{_MARGIN_L}" y1="{_HEIGHT - _MARGIN_B}" '
        f'x2="{_WIDTH - _MARGIN_R}" y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>',
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" '
        f'x2="{_MARGIN_L}" y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>',
    ]

    n_ticks = 5
    for i in range(n_ticks):
        vx = x_lo + (x_hi - x_lo) * i / (n_ticks - 1)
        vy = y_lo + (y_hi - y_lo) * i / (n_ticks - 1)
        label_x = 10.0**vx if log_log else vx
        label_y = 10.0**vy if log_log else vy
        out.append(
            f'<line x1="{_fmt(px(vx))}" y1="{_HEIGHT - _MARGIN_B}" '
            f'x2="{_fmt(px(vx))}" y2="{_HEIGHT - _MARGIN_B + 5}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_fmt(px(vx))}" y="{_HEIGHT - _MARGIN_B + 18}" '
            f'font-size="11" text-anchor="middle">{_tick_label(label_x)}</text>'
        )
        out.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(py(vy))}" '
            f'x2="{_MARGIN_L}" y2="{_fmt(py(vy))}" stroke="black"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 8}" y="{_fmt(py(vy) + 4)}" '
            f'font-size="11" text-anchor="end">{_tick_label(label_y)}</text>'
        )

    out.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_HEIGHT - 12}" '
        f'font-size="13" text-anchor="middle">{x_label}</text>'
    )
    out.append(
        f'<text x="16" y="{_MARGIN_T + plot_h / 2:.2f}" font-size="13" '
        f'text-anchor="middle" transform="rotate(-90 16 '
        f'{_MARGIN_T + plot_h / 2:.2f})">{y_label}</text>'
    )

    for i, s in enumerate(series_list):
        color = _PALETTE[i % len(_PALETTE)]
        coords = [(px(tx(x)), py(tx(y))) for x, y in s.points]
        if s.style == "line":
            joined = " ".join(f"{_fmt(cx)},{_fmt(cy)}" for cx, cy in coords)
            out.append(
                f'<polyline points="{joined}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
        else:
            for cx, cy in coords:
                out.append(
                    f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="3" '
                    f'fill="{color}"/>'
                )
        ly = _MARGIN_T + 16 + 16 * i
        out.append(
            f'<line x1="{_WIDTH - _MARGIN_R - 150}" y1="{ly}" '
            f'x2="{_WIDTH - _MARGIN_R - 126}" y2="{ly}" stroke="{color}" '
            f'stroke-width="2"/>'
        )
        out.append(
            f'<text x="{_WIDTH - _MARGIN_R - 120}" y="{ly + 4}" '
            f'font-size="12">{s.name}</text>'
        )

    out.append("</svg>")

    from .dataio import atomic_write_text

    atomic_write_text(path, "\n".join(out) + "\n")
