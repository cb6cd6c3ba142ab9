"""Deterministic JSON/CSV writers and the diagram SVG renderer."""
from __future__ import annotations

import csv
import io
import json
import math
from fractions import Fraction

import numpy as np


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _clean(obj):
    # NaN/inf are not JSON; they become null
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(data) -> str:
    """JSON with shortest round-trip floats and stable key order."""
    return json.dumps(_clean(data), default=_default, indent=2, allow_nan=False) + "\n"


def write_json(data, path=None, stream=None):
    text = dumps(data)
    if path is None:
        (stream or io.StringIO()).write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in rows:
            writer.writerow(row)


def diagram_svg(diagram, box, size: int = 480, margin: int = 40) -> str:
    """(theta, s) picture with s on the vertical axis."""
    (s0, s1), (t0, t1) = box.s, box.theta
    ws, wt = (s1 - s0) or 1.0, (t1 - t0) or 1.0

    def xy(s, t):
        return (margin + (t - t0) / wt * size, margin + (1.0 - (s - s0) / ws) * size)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 2 * margin}" '
           f'height="{size + 2 * margin}" viewBox="0 0 {size + 2 * margin} {size + 2 * margin}">',
           f'<rect x="{margin}" y="{margin}" width="{size}" height="{size}" fill="none" stroke="#888"/>',
           f'<text x="{margin}" y="{margin - 8}" font-size="12">rotation number '
           f'{diagram.pq.numerator}/{diagram.pq.denominator}</text>',
           f'<text x="{margin + size / 2}" y="{2 * margin + size - 10}" font-size="12">theta</text>',
           f'<text x="8" y="{margin + size / 2}" font-size="12">s</text>']
    for c in diagram.curves:
        pts = " ".join("{:.3f},{:.3f}".format(*xy(p[0], p[1])) for p in c.points)
        out.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" stroke-width="1.5"/>')
    for cp in diagram.cusps:
        x, y = xy(cp.s, cp.theta)
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="4" fill="#c0392b"/>')
    for it in diagram.intersections:
        x, y = xy(it.s, it.theta)
        out.append(f'<path d="M{x - 5:.3f},{y - 5:.3f} L{x + 5:.3f},{y + 5:.3f} '
                   f'M{x - 5:.3f},{y + 5:.3f} L{x + 5:.3f},{y - 5:.3f}" stroke="#27ae60" stroke-width="2"/>')
    for h in diagram.horizontal_tangents:
        x, y = xy(h.s, h.theta)
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="5" fill="none" stroke="#8e44ad" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
