"""Minimal SVG 1.1 writer for line, bar, scatter and heatmap figures.

Output depends only on the data: coordinates are printed with fixed precision
and nothing time-dependent is embedded.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)
RED = "#d62728"
GREY = "#9e9e9e"
BLUE = "#1f77b4"


def _f(x: float) -> str:
    return f"{x:.2f}"


class Canvas:
    def __init__(self, title: str, width: int = WIDTH, height: int = HEIGHT):
        self.width, self.height = width, height
        self.parts = [
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}" font-family="sans-serif">\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _range(values: Sequence[float], pad: float = 0.05) -> tuple[float, float]:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


class Axes:
    def __init__(self, canvas: Canvas, xlim, ylim, xlabel: str = "", ylabel: str = ""):
        self.c = canvas
        self.x0 = MARGIN["left"]
        self.x1 = canvas.width - MARGIN["right"]
        self.y0 = canvas.height - MARGIN["bottom"]
        self.y1 = MARGIN["top"]
        self.xlim, self.ylim = xlim, ylim
        c = canvas
        c.add(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x1}" y2="{self.y0}" stroke="black"/>')
        c.add(f'<line x1="{self.x0}" y1="{self.y0}" x2="{self.x0}" y2="{self.y1}" stroke="black"/>')
        if xlabel:
            c.add(f'<text x="{(self.x0 + self.x1) / 2:.1f}" y="{canvas.height - 12}" '
                  f'text-anchor="middle" font-size="12">{escape(xlabel)}</text>')
        if ylabel:
            cy = (self.y0 + self.y1) / 2
            c.add(f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-size="12" '
                  f'transform="rotate(-90 16 {cy:.1f})">{escape(ylabel)}</text>')
        for i in range(5):
            v = ylim[0] + (ylim[1] - ylim[0]) * i / 4
            y = self.py(v)
            c.add(f'<text x="{self.x0 - 6}" y="{_f(y + 4)}" text-anchor="end" font-size="10">{v:.3g}</text>')

    def px(self, x: float) -> float:
        lo, hi = self.xlim
        return self.x0 + (x - lo) / (hi - lo) * (self.x1 - self.x0)

    def py(self, y: float) -> float:
        lo, hi = self.ylim
        return self.y0 - (y - lo) / (hi - lo) * (self.y0 - self.y1)

    def xtick(self, x: float, text: str) -> None:
        self.c.add(f'<text x="{_f(self.px(x))}" y="{self.y0 + 16}" text-anchor="middle" '
                   f'font-size="10">{escape(text)}</text>')

    def hline(self, y: float, dashed: bool = True, color: str = "black") -> None:
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        self.c.add(f'<line x1="{self.x0}" y1="{_f(self.py(y))}" x2="{self.x1}" y2="{_f(self.py(y))}" '
                   f'stroke="{color}"{dash}/>')


def line_chart(title, xs, series: dict[str, Sequence[float]], xlabel="", ylabel="",
               integer_ticks: bool = True) -> str:
    c = Canvas(title)
    ys = [v for s in series.values() for v in s]
    ax = Axes(c, _range(xs, 0.03), _range(ys), xlabel, ylabel)
    colors = [BLUE, "#ff7f0e", "#2ca02c"]
    for (name, s), color in zip(series.items(), colors):
        pts = " ".join(f"{_f(ax.px(x))},{_f(ax.py(y))}" for x, y in zip(xs, s) if math.isfinite(y))
        c.add(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        if len(xs) <= 30:
            for x, y in zip(xs, s):
                if math.isfinite(y):
                    c.add(f'<circle cx="{_f(ax.px(x))}" cy="{_f(ax.py(y))}" r="3" fill="{color}"/>')
    if len(series) > 1:
        for i, (name, color) in enumerate(zip(series, colors)):
            y = MARGIN["top"] + 14 * i + 6
            c.add(f'<rect x="{ax.x1 - 120}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
            c.add(f'<text x="{ax.x1 - 105}" y="{y + 1}" font-size="11">{escape(name)}</text>')
    step = max(1, len(xs) // 10)
    for x in xs[::step]:
        ax.xtick(x, str(int(x)) if integer_ticks else f"{x:.3g}")
    return c.render()


def bar_chart(title, labels: Sequence[str], values: Sequence[float], colors: Sequence[str],
              xlabel="", ylabel="", threshold: Optional[float] = None, ymax: Optional[float] = None) -> str:
    c = Canvas(title)
    top = max([*values, threshold or 0.0, 1e-12])
    ax = Axes(c, (0, len(values)), (0.0, ymax if ymax is not None else top * 1.1), xlabel, ylabel)
    for i, (lab, v, col) in enumerate(zip(labels, values, colors)):
        x = ax.px(i + 0.15)
        w = ax.px(i + 0.85) - x
        y = ax.py(v)
        c.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(ax.y0 - y)}" fill="{col}"/>')
        c.add(f'<text x="{_f(x + w / 2)}" y="{_f(y - 4)}" text-anchor="middle" font-size="10">{v:.3g}</text>')
        ax.xtick(i + 0.5, lab)
    if threshold is not None:
        ax.hline(threshold, dashed=True)
    return c.render()


def scatter(title, xs, ys, colors: Sequence[str], xlabel="", ylabel="", labels=None,
            hline: Optional[float] = None) -> str:
    c = Canvas(title)
    ax = Axes(c, _range(xs), _range(ys), xlabel, ylabel)
    # draw highlighted points last so they sit on top
    order = sorted(range(len(xs)), key=lambda i: colors[i] == RED)
    for i in order:
        c.add(f'<circle cx="{_f(ax.px(xs[i]))}" cy="{_f(ax.py(ys[i]))}" r="3" fill="{colors[i]}" '
              f'fill-opacity="0.8"/>')
        if labels is not None and labels[i]:
            c.add(f'<text x="{_f(ax.px(xs[i]) + 4)}" y="{_f(ax.py(ys[i]) - 4)}" font-size="9">'
                  f'{escape(labels[i])}</text>')
    if hline is not None:
        ax.hline(hline)
    lo, hi = ax.xlim
    for i in range(5):
        v = lo + (hi - lo) * i / 4
        ax.xtick(v, f"{v:.3g}")
    return c.render()


def _diverging(v: float, vmax: float) -> str:
    t = max(-1.0, min(1.0, v / vmax)) if vmax > 0 else 0.0
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(title, matrix, row_labels: Sequence[str], split_col: Optional[int] = None,
            vmax: float = 3.0) -> str:
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    cell_h = max(4, min(14, 600 // max(n_rows, 1)))
    height = MARGIN["top"] + n_rows * cell_h + 30
    width = 900
    c = Canvas(title, width, height)
    left = 90
    cell_w = (width - left - 20) / max(n_cols, 1)
    for i, row in enumerate(matrix):
        y = MARGIN["top"] + i * cell_h
        c.add(f'<text x="{left - 4}" y="{y + cell_h - 2}" text-anchor="end" font-size="{min(9, cell_h)}">'
              f'{escape(row_labels[i])}</text>')
        for j, v in enumerate(row):
            c.add(f'<rect x="{_f(left + j * cell_w)}" y="{y}" width="{_f(cell_w + 0.05)}" '
                  f'height="{cell_h}" fill="{_diverging(v, vmax)}"/>')
    if split_col is not None:
        x = left + split_col * cell_w
        c.add(f'<line x1="{_f(x)}" y1="{MARGIN["top"]}" x2="{_f(x)}" '
              f'y2="{MARGIN["top"] + n_rows * cell_h}" stroke="black" stroke-width="2"/>')
    return c.render()
