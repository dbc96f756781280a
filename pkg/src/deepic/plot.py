"""Static SVG line plots of BER curves with a logarithmic y axis."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")
WIDTH, HEIGHT = 640, 440
MARGIN = {"left": 70, "right": 170, "top": 40, "bottom": 55}


class PlotError(ValueError):
    """Plot inputs are unusable (unreadable CSV, missing column)."""


@dataclass
class PlotSpec:
    inputs: list
    output: str = "plot.svg"
    x: str = "snr_db"
    y: str = "ber_avg"
    group_by: list = field(default_factory=lambda: ["scheme", "h"])
    log_y: bool = True
    title: str = "BER vs SNR"
    xlabel: str = "SNR (dB)"
    ylabel: str = "BER"

    @classmethod
    def from_dict(cls, data: dict) -> "PlotSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise PlotError(f"unknown plot key(s): {', '.join(unknown)}")
        if "inputs" not in data:
            raise PlotError("plot spec needs 'inputs'")
        return cls(**data)


def load_series(spec: PlotSpec) -> dict:
    """Group rows of every input CSV into ``{label: [(x, y), ...]}``."""
    series: dict[str, list] = {}
    needed = [spec.x, spec.y, *spec.group_by]
    for path in spec.inputs:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise PlotError(f"cannot read {path}: {exc}") from exc
        reader = csv.DictReader(text.splitlines())
        header = reader.fieldnames or []
        missing = [c for c in needed if c not in header]
        if missing:
            raise PlotError(f"{path}: missing column(s) {', '.join(missing)}")
        for row in reader:
            label = ", ".join(f"{c}={row[c]}" for c in spec.group_by) or Path(path).stem
            try:
                point = (float(row[spec.x]), float(row[spec.y]))
            except ValueError as exc:
                raise PlotError(f"{path}: non-numeric value in row {row}") from exc
            series.setdefault(label, []).append(point)
    return {k: sorted(v) for k, v in series.items()}


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def render_svg(series: dict, spec: PlotSpec) -> str:
    """SVG text for ``series``; an empty mapping yields bare axes."""
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if (y > 0 or not spec.log_y)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1.0, x1 + 1.0
    if spec.log_y:
        lo = math.floor(math.log10(min(ys))) if ys else -5
        hi = math.ceil(math.log10(max(ys))) if ys else 0
        if hi == lo:
            hi = lo + 1

        def fy(y):
            return (math.log10(y) - lo) / (hi - lo)

        yticks = [(10.0**e, f"1e{e}") for e in range(lo, hi + 1)]
    else:
        lo, hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
        if hi == lo:
            hi = lo + 1.0

        def fy(y):
            return (y - lo) / (hi - lo)

        yticks = [(lo + (hi - lo) * i / 4, f"{lo + (hi - lo) * i / 4:.3g}") for i in range(5)]

    def px(x):
        return MARGIN["left"] + pw * (x - x0) / (x1 - x0)

    def py(y):
        return MARGIN["top"] + ph * (1.0 - fy(y))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="24" text-anchor="middle" font-size="16">{escape(spec.title)}</text>',
        f'<g class="axes" stroke="black" fill="none">'
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"] + ph}" x2="{MARGIN["left"] + pw}" y2="{MARGIN["top"] + ph}"/>'
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" x2="{MARGIN["left"]}" y2="{MARGIN["top"] + ph}"/></g>',
    ]
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        out.append(
            f'<text x="{_fmt(px(xv))}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle" font-size="11">{xv:.3g}</text>'
        )
    for yv, label in yticks:
        out.append(
            f'<line x1="{MARGIN["left"] - 4}" y1="{_fmt(py(yv))}" x2="{MARGIN["left"] + pw}" y2="{_fmt(py(yv))}" '
            f'stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{MARGIN["left"] - 8}" y="{_fmt(py(yv) + 4)}" text-anchor="end" font-size="11">{label}</text>'
        )
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" font-size="13">{escape(spec.xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(spec.ylabel)}</text>'
    )
    legend_x = MARGIN["left"] + pw + 12
    for i, (label, pts) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        drawn = [(x, y) for x, y in pts if y > 0 or not spec.log_y]
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in drawn)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = MARGIN["top"] + 12 + 18 * i
        out.append(
            f'<g class="legend"><line x1="{legend_x}" y1="{ly}" x2="{legend_x + 20}" y2="{ly}" stroke="{color}" '
            f'stroke-width="2"/><text x="{legend_x + 26}" y="{ly + 4}" font-size="11">{escape(label)}</text></g>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot(spec: PlotSpec) -> Path:
    path = Path(spec.output)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_svg(load_series(spec), spec))
    return path
