"""Deterministic CSV, JSON and SVG artifact writers.

Every file starts with one metadata line carrying the config hash and the
versions of the package and its numerical dependencies. CSV and SVG put it in
a comment; JSON puts it in a leading ``"meta"`` member on the first line so
the file stays valid JSON.
"""

import json
import math
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__

__all__ = ["metadata", "metadata_line", "write_csv", "write_json", "write_svg_field", "read_csv"]


def metadata(config_hash):
    return {
        "config_sha256": config_hash,
        "wgtorus": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pyyaml": yaml.__version__,
    }


def metadata_line(config_hash):
    return " ".join(f"{k}={v}" for k, v in metadata(config_hash).items())


def _fmt(x):
    return repr(float(x))


def write_csv(path, columns, config_hash):
    """Write named equal-length columns with a comment metadata line and a header row.

    Floats are written with ``repr`` so they round-trip exactly.
    """
    path = Path(path)
    names = list(columns)
    data = [np.ravel(np.asarray(columns[n], dtype=float)) for n in names]
    size = {len(c) for c in data}
    if len(size) != 1:
        raise ValueError(f"columns differ in length: {dict(zip(names, map(len, data)))}")
    lines = ["# " + metadata_line(config_hash), ",".join(names)]
    lines.extend(",".join(_fmt(v) for v in row) for row in zip(*data))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Read a CSV written by :func:`write_csv` into a dict of arrays."""
    with open(path) as fh:
        fh.readline()
        names = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {n: data[:, i] for i, n in enumerate(names)}


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, data, config_hash):
    """Write ``{"meta": ..., "data": ...}`` with sorted keys; the first line is the metadata."""
    path = Path(path)
    meta = json.dumps(metadata(config_hash), sort_keys=True)
    body = json.dumps(_clean(data), sort_keys=True, indent=1)
    path.write_text('{"meta": ' + meta + ',\n"data": ' + body + "}\n")
    return path


def write_svg_field(path, s, rho, values, config_hash, overlay=None, cells=(160, 80)):
    """Grey-scale raster of ``values[s, rho]`` with an optional ``(s, rho)`` overlay polyline."""
    path = Path(path)
    values = np.abs(np.asarray(values))
    ns, nr = values.shape
    i = np.linspace(0, ns - 1, min(cells[0], ns)).astype(int)
    j = np.linspace(0, nr - 1, min(cells[1], nr)).astype(int)
    v = values[np.ix_(i, j)]
    v = v / (v.max() or 1.0)
    width, height, cw, ch = 640, 320, 640 / len(i), 320 / len(j)
    out = [
        "<!-- " + metadata_line(config_hash) + " -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
    ]
    for a in range(len(i)):
        for b in range(len(j)):
            g = int(round(255 * (1.0 - v[a, b])))
            out.append(f'<rect x="{a * cw:.2f}" y="{b * ch:.2f}" width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" '
                       f'fill="rgb({g},{g},{g})"/>')
    if overlay is not None:
        os_, orho = (np.asarray(x, dtype=float) for x in overlay)
        x = (os_ - s[0]) / (s[-1] - s[0]) * width
        y = (orho - rho[0]) / (rho[-1] - rho[0]) * height
        keep = (x >= 0) & (x <= width) & (y >= 0) & (y <= height)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x[keep], y[keep]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="red" stroke-width="1.5"/>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path
