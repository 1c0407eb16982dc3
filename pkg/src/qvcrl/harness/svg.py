"""Minimal SVG learning-curve plots: one line per series with a shaded 95% CI band."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Sequence

import numpy as np

from qvcrl.errors import ConfigError
from qvcrl.harness.metrics import AggregateStats

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT, TOP, BOTTOM = 70, 170, 30, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def render_svg(series: Sequence[tuple[str, AggregateStats]], title: str = "") -> str:
    if not series:
        raise ConfigError("nothing to plot")
    x_lo = min(float(s.episodes[0]) for _, s in series)
    x_hi = max(float(s.episodes[-1]) for _, s in series)
    lows, highs = [], []
    for _, s in series:
        half = np.nan_to_num(s.ci95_half)
        lows.append(np.min(s.mean - half))
        highs.append(np.max(s.mean + half))
    y_lo, y_hi = float(min(lows)), float(max(highs))
    if y_hi - y_lo < 1e-9:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return TOP + (y_hi - y) / (y_hi - y_lo) * ph

    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=str(WIDTH), height=str(HEIGHT),
                     viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ET.SubElement(svg, "rect", x="0", y="0", width=str(WIDTH), height=str(HEIGHT), fill="white")
    if title:
        ET.SubElement(svg, "text", x=str(LEFT), y="20", attrib={"font-size": "14"}).text = title

    axes = ET.SubElement(svg, "g", id="axes", stroke="black", fill="none")
    ET.SubElement(axes, "line", x1=str(LEFT), y1=str(TOP + ph), x2=str(LEFT + pw), y2=str(TOP + ph))
    ET.SubElement(axes, "line", x1=str(LEFT), y1=str(TOP), x2=str(LEFT), y2=str(TOP + ph))
    labels = ET.SubElement(svg, "g", id="tick-labels", attrib={"font-size": "11"})
    for x in _ticks(x_lo, x_hi):
        ET.SubElement(labels, "text", x=f"{sx(x):.2f}", y=str(TOP + ph + 16),
                      attrib={"text-anchor": "middle"}).text = f"{x:.0f}"
    for y in _ticks(y_lo, y_hi):
        ET.SubElement(labels, "text", x=str(LEFT - 6), y=f"{sy(y) + 4:.2f}",
                      attrib={"text-anchor": "end"}).text = f"{y:.3g}"
    ET.SubElement(svg, "text", x=str(LEFT + pw / 2), y=str(HEIGHT - 10),
                  attrib={"text-anchor": "middle", "font-size": "12"}).text = "episode"
    ET.SubElement(svg, "text", x="14", y=str(TOP + ph / 2), transform=f"rotate(-90 14 {TOP + ph / 2})",
                  attrib={"text-anchor": "middle", "font-size": "12"}).text = "reward (50-episode moving average)"

    for i, (label, s) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        group = ET.SubElement(svg, "g", attrib={"class": "series", "data-label": label})
        half = s.ci95_half
        if np.all(np.isfinite(half)) and np.any(half > 0):
            upper = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(s.episodes, s.mean + half)]
            lower = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(s.episodes[::-1], (s.mean - half)[::-1])]
            ET.SubElement(group, "polygon", points=" ".join(upper + lower), fill=color,
                          attrib={"fill-opacity": "0.2", "stroke": "none"})
        d = " ".join(
            f"{'M' if j == 0 else 'L'}{sx(x):.2f},{sy(y):.2f}" for j, (x, y) in enumerate(zip(s.episodes, s.mean))
        )
        ET.SubElement(group, "path", d=d, stroke=color, fill="none", attrib={"stroke-width": "1.5"})
        ly = TOP + 10 + 18 * i
        ET.SubElement(group, "line", x1=str(LEFT + pw + 10), y1=str(ly), x2=str(LEFT + pw + 30), y2=str(ly),
                      stroke=color, attrib={"stroke-width": "2"})
        ET.SubElement(group, "text", x=str(LEFT + pw + 35), y=str(ly + 4),
                      attrib={"font-size": "11"}).text = label
    return ET.tostring(svg, encoding="unicode", xml_declaration=True)


def emit_plot(series: Sequence[tuple[str, AggregateStats]], path, title: str = "") -> None:
    text = render_svg(series, title)
    if not all(math.isfinite(v) for _, s in series for v in s.mean):
        raise ConfigError("series contains non-finite means")
    with open(path, "w") as fh:
        fh.write(text + "\n")
