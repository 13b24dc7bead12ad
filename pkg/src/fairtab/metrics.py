"""Export and render the convergence series recorded during training."""

from __future__ import annotations

import csv
import xml.etree.ElementTree as ET

from .debias import TraceRecord
from .errors import InputError

TRACE_HEADER = ["epoch", "mse", "d_current", "d_hat", "l_a", "ratchet_best", "d_bar", "baseline"]

# series rendered on a min-max normalized axis; audit values keep true scale
_SCALED_SERIES = ["mse", "d_current", "d_hat", "l_a", "ratchet_best"]
_COLORS = {
    "mse": "#1f77b4",
    "d_current": "#ff7f0e",
    "d_hat": "#2ca02c",
    "l_a": "#d62728",
    "ratchet_best": "#9467bd",
    "d_bar": "#000000",
    "baseline": "#7f7f7f",
}


def export_trace(trace, path):
    """Write the per-epoch record as CSV; d_bar is blank off audit epochs."""
    if not trace:
        raise InputError("cannot export an empty trace")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in trace:
            writer.writerow(
                [
                    r.epoch,
                    repr(float(r.mse)),
                    repr(float(r.d_current)),
                    repr(float(r.d_hat)),
                    repr(float(r.l_a)),
                    repr(float(r.ratchet_best)),
                    "" if r.d_bar is None else repr(float(r.d_bar)),
                    repr(float(r.baseline)),
                ]
            )


def read_trace(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise InputError(f"unexpected trace header {header}")
        out = []
        for row in reader:
            out.append(
                TraceRecord(
                    epoch=int(row[0]),
                    mse=float(row[1]),
                    d_current=float(row[2]),
                    d_hat=float(row[3]),
                    l_a=float(row[4]),
                    ratchet_best=float(row[5]),
                    d_bar=None if row[6] == "" else float(row[6]),
                    baseline=float(row[7]),
                )
            )
    return out


def _normalize(values):
    lo, hi = min(values), max(values)
    if hi - lo <= 0:
        return [0.5 for _ in values]
    return [(v - lo) / (hi - lo) for v in values]


def render_convergence_chart(trace, path, width=880, height=520):
    """Render one SVG line chart of the whole trace.

    Audit accuracy and the majority baseline sit on a true [0, 1] left
    axis; every other series is min-max normalized and marked "(scaled)"
    in the legend. The baseline is a dashed horizontal reference.
    """
    if not trace:
        raise InputError("cannot render an empty trace")
    left, right, top, bottom = 60.0, width - 190.0, 25.0, height - 45.0
    epochs = [r.epoch for r in trace]
    e_lo, e_hi = min(epochs), max(epochs)
    span = (e_hi - e_lo) or 1

    def px(epoch):
        return left + (epoch - e_lo) / span * (right - left)

    def py(v):  # v in [0, 1] after normalization
        return bottom - v * (bottom - top)

    svg = ET.Element(
        "svg",
        {
            "xmlns": "http://www.w3.org/2000/svg",
            "version": "1.1",
            "viewBox": f"0 0 {width} {height}",
            "width": str(width),
            "height": str(height),
        },
    )
    ET.SubElement(
        svg,
        "rect",
        {"x": "0", "y": "0", "width": str(width), "height": str(height), "fill": "white"},
    )
    # axes
    axis = {"stroke": "#333333", "stroke-width": "1", "fill": "none"}
    ET.SubElement(
        svg,
        "polyline",
        {**axis, "points": f"{left},{top} {left},{bottom} {right},{bottom}"},
    )
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = py(tick)
        label = ET.SubElement(
            svg,
            "text",
            {"x": str(left - 8), "y": f"{y + 4:.1f}", "font-size": "11", "text-anchor": "end"},
        )
        label.text = f"{tick:g}"
    for epoch in (e_lo, e_hi):
        label = ET.SubElement(
            svg,
            "text",
            {"x": f"{px(epoch):.1f}", "y": str(height - 22), "font-size": "11", "text-anchor": "middle"},
        )
        label.text = str(epoch)
    caption = ET.SubElement(
        svg,
        "text",
        {"x": str(left), "y": str(height - 6), "font-size": "11", "fill": "#555555"},
    )
    caption.text = "epoch (left axis: proportion correct; scaled series min-max normalized)"

    legend = []

    def add_polyline(name, points, dashed=False):
        attrs = {
            "fill": "none",
            "stroke": _COLORS[name],
            "stroke-width": "1.5",
            "points": " ".join(f"{x:.2f},{y:.2f}" for x, y in points),
        }
        if dashed:
            attrs["stroke-dasharray"] = "6 4"
        ET.SubElement(svg, "polyline", attrs)

    for name in _SCALED_SERIES:
        values = _normalize([getattr(r, name) for r in trace])
        add_polyline(name, [(px(r.epoch), py(v)) for r, v in zip(trace, values)])
        legend.append((name + " (scaled)", _COLORS[name], False))

    audited = [r for r in trace if r.d_bar is not None]
    if audited:
        pts = [(px(r.epoch), py(r.d_bar)) for r in audited]
        add_polyline("d_bar", pts)
        for x, y in pts:
            ET.SubElement(
                svg,
                "circle",
                {"cx": f"{x:.2f}", "cy": f"{y:.2f}", "r": "3", "fill": _COLORS["d_bar"]},
            )
        legend.append(("d_bar", _COLORS["d_bar"], False))

    b = trace[0].baseline
    add_polyline("baseline", [(px(e_lo), py(b)), (px(e_hi), py(b))], dashed=True)
    legend.append(("baseline", _COLORS["baseline"], True))

    for i, (label, color, dashed) in enumerate(legend):
        y = top + 14 + i * 18
        attrs = {
            "x1": f"{right + 12}",
            "y1": f"{y:.1f}",
            "x2": f"{right + 40}",
            "y2": f"{y:.1f}",
            "stroke": color,
            "stroke-width": "1.5",
        }
        if dashed:
            attrs["stroke-dasharray"] = "6 4"
        ET.SubElement(svg, "line", attrs)
        text = ET.SubElement(
            svg, "text", {"x": f"{right + 46}", "y": f"{y + 4:.1f}", "font-size": "11"}
        )
        text.text = label

    ET.ElementTree(svg).write(path, encoding="utf-8", xml_declaration=True)
