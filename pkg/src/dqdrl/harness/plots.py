"""Archive heatmaps (CSV matrix + SVG) and objective histograms."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Optional

import numpy as np
from matplotlib import colormaps
from matplotlib.colors import Normalize, to_hex

from ..archive import GridArchive
from ..core import UnsupportedOperationError, atomic_write_text

HISTOGRAM_MARGIN = 400.0


def heatmap_csv_text(archive: GridArchive) -> str:
    """Objective matrix, first measure along rows; empty cells are blank."""
    if archive.spec.measure_dim != 2:
        raise UnsupportedOperationError(
            f"heatmaps need a 2-D measure space; this archive has {archive.spec.measure_dim} "
            "measures")
    grid = archive.objective_grid()
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in grid:
        writer.writerow(["" if np.isnan(x) else format(x, ".17g") for x in row])
    return buf.getvalue()


def heatmap_svg_text(archive: GridArchive, min_objective: float, max_objective: float,
                     cell_px: int = 12, cmap: str = "viridis") -> str:
    """One ``rect`` per grid cell; empty cells are light grey.  The colour
    scale spans ``[min_objective, max_objective]``."""
    if archive.spec.measure_dim != 2:
        raise UnsupportedOperationError("heatmaps need a 2-D measure space")
    grid = archive.objective_grid()
    rows, cols = grid.shape
    colour = colormaps[cmap]
    norm = Normalize(vmin=min_objective, vmax=max_objective, clip=True)
    w, h = cols * cell_px, rows * cell_px
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
             f'viewBox="0 0 {w} {h}" data-min="{min_objective!r}" data-max="{max_objective!r}">']
    for i in range(rows):
        for j in range(cols):
            v = grid[i, j]
            fill = "#eeeeee" if np.isnan(v) else to_hex(colour(norm(v)))
            # Measure 0 runs up the y axis, measure 1 along x.
            y = (rows - 1 - i) * cell_px
            parts.append(f'<rect x="{j * cell_px}" y="{y}" width="{cell_px}" '
                         f'height="{cell_px}" fill="{fill}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_heatmap(archive: GridArchive, out, min_objective: Optional[float] = None,
                 max_objective: Optional[float] = None) -> tuple:
    """Write ``<stem>.csv`` and ``<stem>.svg`` next to ``out``; returns both paths."""
    out = Path(out)
    csv_path, svg_path = out.with_suffix(".csv"), out.with_suffix(".svg")
    text = heatmap_csv_text(archive)
    objs = archive.objectives()
    lo = min_objective if min_objective is not None else (objs.min() if objs.size else 0.0)
    hi = max_objective if max_objective is not None else (objs.max() if objs.size else 1.0)
    if hi <= lo:
        hi = lo + 1.0
    atomic_write_text(csv_path, text)
    atomic_write_text(svg_path, heatmap_svg_text(archive, float(lo), float(hi)))
    return csv_path, svg_path


def histogram_counts(objectives, bins: int, min_objective: float, max_objective: float,
                     margin: float = HISTOGRAM_MARGIN) -> tuple:
    """``(lower edges, counts)`` of equal-width bins over
    ``[min_objective, max_objective + margin]``; the last bin is closed."""
    if bins < 1:
        raise ValueError(f"bins must be at least 1, got {bins}")
    edges = np.linspace(min_objective, max_objective + margin, bins + 1)
    counts, _ = np.histogram(np.asarray(objectives, dtype=np.float64), bins=edges)
    return edges[:-1], counts


def emit_histogram(archive: GridArchive, out, bins: int = 40, min_objective: float = None,
                   max_objective: float = None, margin: float = HISTOGRAM_MARGIN):
    objs = archive.objectives()
    lo = min_objective if min_objective is not None else (objs.min() if objs.size else 0.0)
    hi = max_objective if max_objective is not None else (objs.max() if objs.size else 0.0)
    edges, counts = histogram_counts(objs, bins, float(lo), float(hi), margin)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bin_lower", "count"])
    for e, c in zip(edges, counts):
        writer.writerow([format(e, ".17g"), str(int(c))])
    out = Path(out)
    atomic_write_text(out, buf.getvalue())
    return out
