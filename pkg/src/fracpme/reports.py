"""Deterministic report emission: atomic CSV/JSON writers and plain SVG charts.

All writes go through write-then-rename so no error path leaves a partial
file; JSON is emitted with sorted keys so identical configs give
byte-identical reports.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(f"{v:.17g}" if isinstance(v, float) else str(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# phase-diagram strip chart (hand-rolled SVG; no plotting toolchain)

_COLORS = {"infinite_evidence": "#cc2233", "finite_evidence": "#2244cc",
           "inconclusive": "#888888"}


def phase_diagram_svg(points, m_split: float = 2.0) -> str:
    """Strip chart of (m, classification) points along the m axis.

    Mirrors the survey-figure idiom: solid red for the infinite-propagation
    range, dashed blue for finite, with one dot per swept m value.
    """
    ms = [p["m"] for p in points]
    m_lo, m_hi = min(ms + [1.0]), max(ms + [m_split]) + 0.5
    width, height, pad = 640, 120, 50
    y = height // 2

    def sx(m):
        return pad + (m - m_lo) / (m_hi - m_lo) * (width - 2 * pad)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<line x1="{sx(m_lo):.1f}" y1="{y}" x2="{sx(m_split):.1f}" y2="{y}" '
             'stroke="#cc2233" stroke-width="3"/>',
             f'<line x1="{sx(m_split):.1f}" y1="{y}" x2="{width - pad}" y2="{y}" '
             'stroke="#2244cc" stroke-width="3" stroke-dasharray="3 6"/>',
             f'<line x1="{sx(m_split):.1f}" y1="{y - 10}" x2="{sx(m_split):.1f}" y2="{y + 10}" '
             'stroke="#000" stroke-width="1"/>',
             f'<text x="{sx(m_split):.1f}" y="{y + 28}" font-size="12" text-anchor="middle">2</text>',
             f'<text x="{pad}" y="{y - 26}" font-size="12">m axis: red = infinite propagation, '
             'dashed blue = finite</text>']
    for p in points:
        color = _COLORS.get(p["classification"], "#888888")
        parts.append(f'<circle cx="{sx(p["m"]):.1f}" cy="{y}" r="6" fill="{color}" '
                     'stroke="#000" stroke-width="0.8"/>')
        parts.append(f'<text x="{sx(p["m"]):.1f}" y="{y + 28}" font-size="11" '
                     f'text-anchor="middle">{p["m"]:g}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def polyline_svg(series, title: str = "", width: int = 640, height: int = 360) -> str:
    """Minimal polyline chart for (label, xs, ys) series."""
    pad = 50
    all_x = [x for _, xs, _ in series for x in xs]
    all_y = [y for _, _, ys in series for y in ys]
    if not all_x:
        return '<svg xmlns="http://www.w3.org/2000/svg"/>'
    x_lo, x_hi = min(all_x), max(all_x)
    y_lo, y_hi = min(all_y), max(all_y)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def pt(x, yv):
        px = pad + (x - x_lo) / x_span * (width - 2 * pad)
        py = height - pad - (yv - y_lo) / y_span * (height - 2 * pad)
        return f"{px:.2f},{py:.2f}"

    palette = ["#2244cc", "#cc2233", "#22aa55", "#aa7722", "#7722aa"]
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
             'fill="none" stroke="#bbb"/>',
             f'<text x="{pad}" y="{pad - 12}" font-size="13">{title}</text>']
    for i, (label, xs, ys) in enumerate(series):
        color = palette[i % len(palette)]
        pts = " ".join(pt(x, yv) for x, yv in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - pad + 4}" y="{pad + 14 * i + 10}" font-size="11" '
                     f'fill="{color}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
