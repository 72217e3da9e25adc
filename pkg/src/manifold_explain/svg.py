"""Minimal SVG scatter plots: data cloud, shape outline, samples and probes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

GRAY = "#9a9a9a"
RED = "#d62728"
CLOUD = "#1f77b4"


def boundary_edges(shape) -> np.ndarray:
    """Edges used by exactly one kept triangle, shape ``(e, 2)`` vertex indices."""
    tris = shape.kept_triangles
    if len(tris) == 0:
        return np.empty((0, 2), dtype=np.int64)
    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges.sort(axis=1)
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    return uniq[counts == 1]


class Canvas:
    """Data-space to pixel mapping with y pointing up."""

    def __init__(self, lo, hi, width=640, pad=16):
        lo, hi = np.asarray(lo, float), np.asarray(hi, float)
        span = np.maximum(hi - lo, 1e-12)
        self.scale = (width - 2 * pad) / span.max()
        self.lo, self.pad = lo, pad
        self.width = width
        self.height = int(round(span[1] * self.scale + 2 * pad))
        self.parts = []

    def xy(self, p):
        p = np.atleast_2d(np.asarray(p, float))
        px = self.pad + (p[:, 0] - self.lo[0]) * self.scale
        py = self.height - self.pad - (p[:, 1] - self.lo[1]) * self.scale
        return px, py

    def points(self, pts, color, r=1.2, opacity=1.0):
        px, py = self.xy(pts)
        body = "".join(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="{r}"/>' for a, b in zip(px, py))
        self.parts.append(f'<g fill="{color}" fill-opacity="{opacity}">{body}</g>')

    def segments(self, a, b, color, width=0.8):
        ax, ay = self.xy(a)
        bx, by = self.xy(b)
        d = "".join(f"M{x0:.1f} {y0:.1f}L{x1:.1f} {y1:.1f}" for x0, y0, x1, y1 in zip(ax, ay, bx, by))
        self.parts.append(f'<path d="{d}" stroke="{color}" stroke-width="{width}" fill="none"/>')

    def cross(self, p, color="black", size=6, label=None):
        (x,), (y,) = self.xy(p)
        self.parts.append(
            f'<path d="M{x - size:.1f} {y - size:.1f}L{x + size:.1f} {y + size:.1f}M{x - size:.1f} {y + size:.1f}L{x + size:.1f} {y - size:.1f}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        if label:
            self.parts.append(f'<text x="{x + size + 2:.1f}" y="{y - size:.1f}" font-size="12" font-family="sans-serif">{label}</text>')

    def render(self) -> str:
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">\n<rect width="100%" height="100%" fill="white"/>\n'
            + "\n".join(self.parts)
            + "\n</svg>\n"
        )


def _bounds(*arrays):
    pts = np.concatenate([np.atleast_2d(a) for a in arrays if a is not None and len(a)])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    margin = 0.03 * (hi - lo).max()
    return lo - margin, hi + margin


def sampling_plot(probe, accepted, rejected=None, shape=None, cloud=None, window=None, width=640, label=None) -> str:
    """Gray rejected and red accepted samples around a probe, over the data cloud and shape outline.

    ``window`` is a half-width around the probe; by default the plot spans all samples.
    """
    probe = np.asarray(probe, float)
    if window is not None:
        lo, hi = probe - window, probe + window
    else:
        lo, hi = _bounds(accepted, rejected, probe[None])
    cv = Canvas(lo, hi, width)

    def clip(p):
        if p is None or not len(p):
            return p
        keep = np.all((p >= lo) & (p <= hi), axis=1)
        return p[keep]

    if cloud is not None:
        cv.points(clip(np.asarray(cloud)), CLOUD, r=0.8, opacity=0.35)
    if shape is not None:
        e = boundary_edges(shape)
        v = shape.vertices
        a, b = v[e[:, 0]], v[e[:, 1]]
        near = np.all((a >= lo) & (a <= hi), axis=1) | np.all((b >= lo) & (b <= hi), axis=1)
        cv.segments(a[near], b[near], "black", 0.6)
    if rejected is not None and len(rejected):
        cv.points(clip(rejected), GRAY, r=1.3, opacity=0.7)
    cv.points(clip(accepted), RED, r=1.3, opacity=0.8)
    cv.cross(probe, label=label)
    return cv.render()


def overview_plot(cloud, shape, probes: dict, width=720) -> str:
    """Whole data set with the shape outline and labelled probe crosses."""
    lo, hi = _bounds(cloud, np.array(list(probes.values()), float))
    cv = Canvas(lo, hi, width)
    cv.points(cloud, CLOUD, r=0.6, opacity=0.35)
    if shape is not None:
        e = boundary_edges(shape)
        cv.segments(shape.vertices[e[:, 0]], shape.vertices[e[:, 1]], "black", 0.4)
    for name, p in probes.items():
        cv.cross(p, color=RED, label=name)
    return cv.render()


def fidelity_plot(y_true, y_pred, width=360) -> str:
    """Surrogate prediction against reference value, with the identity line."""
    y_true, y_pred = np.asarray(y_true, float), np.asarray(y_pred, float)
    lo = min(y_true.min(), y_pred.min())
    hi = max(y_true.max(), y_pred.max())
    cv = Canvas((lo, lo), (hi, hi), width)
    cv.segments(np.array([[lo, lo]]), np.array([[hi, hi]]), GRAY, 1.0)
    cv.points(np.column_stack([y_true, y_pred]), RED, r=1.2, opacity=0.6)
    return cv.render()


def write_svg(text: str, path) -> None:
    Path(path).write_text(text)
