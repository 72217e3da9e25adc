"""Delaunay triangulation and alpha-shape domain estimation in the plane.

The triangulation is built by Bowyer-Watson incremental insertion. Instead of
a finite super-triangle, the outer face is closed with a single vertex at
infinity ("ghost" triangles), which is the limit of an infinitely large
super-triangle and guarantees the convex hull is recovered exactly. Ghost
faces are removed from the result.

The alpha shape keeps the Delaunay triangles whose circumradius is at most
``alpha``; membership queries go through a uniform grid over the kept
triangles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from manifold_explain.errors import DegenerateInputError, SchemaError, ValidationError

PREDICATE_RTOL = 1e-10
INSERTION_SEED = 0x5EED
_INF = -1


def orient(ax, ay, bx, by, cx, cy):
    """Twice the signed area of (a, b, c); positive when counterclockwise.

    Returns 0.0 when the determinant is below the relative tolerance.
    """
    l = (bx - ax) * (cy - ay)
    r = (by - ay) * (cx - ax)
    det = l - r
    if abs(det) <= PREDICATE_RTOL * (abs(l) + abs(r)):
        return 0.0
    return det


def incircle(ax, ay, bx, by, cx, cy, dx, dy):
    """Positive when d lies strictly inside the circumcircle of ccw (a, b, c)."""
    adx, ady = ax - dx, ay - dy
    bdx, bdy = bx - dx, by - dy
    cdx, cdy = cx - dx, cy - dy
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    t1, t2 = bdx * cdy, cdx * bdy
    t3, t4 = cdx * ady, adx * cdy
    t5, t6 = adx * bdy, bdx * ady
    det = ad * (t1 - t2) + bd * (t3 - t4) + cd * (t5 - t6)
    perm = ad * (abs(t1) + abs(t2)) + bd * (abs(t3) + abs(t4)) + cd * (abs(t5) + abs(t6))
    if abs(det) <= PREDICATE_RTOL * perm:
        return 0.0
    return det


def circumradius(a, b, c) -> float:
    """Radius of the circle through three points, ``|ab||bc||ca| / (4 area)``."""
    (ax, ay), (bx, by), (cx, cy) = a, b, c
    area2 = orient(ax, ay, bx, by, cx, cy)
    if area2 == 0.0:
        raise DegenerateInputError("circumradius undefined for collinear points")
    ab = math.hypot(bx - ax, by - ay)
    bc = math.hypot(cx - bx, cy - by)
    ca = math.hypot(ax - cx, ay - cy)
    return ab * bc * ca / (2.0 * abs(area2))


def circumradii(points, triangles):
    """Vectorized circumradius for an ``(t, 3)`` index array; inf for degenerate rows."""
    p = np.asarray(points, dtype=float)[np.asarray(triangles, dtype=np.int64)]
    if len(p) == 0:
        return np.empty(0)
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    ab = np.hypot(*(b - a).T)
    bc = np.hypot(*(c - b).T)
    ca = np.hypot(*(a - c).T)
    area2 = np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        r = ab * bc * ca / (2.0 * area2)
    r[~(area2 > 0)] = np.inf
    return r


@dataclass(frozen=True, eq=False)
class Triangulation:
    vertices: np.ndarray  # (n, 2), deduplicated input points in first-occurrence order
    triangles: np.ndarray  # (t, 3) counterclockwise vertex indices

    def areas(self):
        p = self.vertices[self.triangles]
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def _hilbert_keys(points, order=16):
    """Hilbert-curve index of each point on a ``2**order`` grid over the bounding box."""
    lo = points.min(axis=0)
    span = np.maximum(points.max(axis=0) - lo, 1e-300)
    side = (1 << order) - 1
    g = np.floor((points - lo) / span * side).astype(np.int64)
    x, y = g[:, 0].copy(), g[:, 1].copy()
    d = np.zeros(len(points), dtype=np.int64)
    s = 1 << (order - 1)
    while s > 0:
        rx = (x & s) > 0
        ry = (y & s) > 0
        d += s * s * ((3 * rx) ^ ry)
        # rotate the quadrant
        flip = ~ry
        swap_x = np.where(flip & rx, side - x, x)
        swap_y = np.where(flip & rx, side - y, y)
        x = np.where(flip, swap_y, x)
        y = np.where(flip, swap_x, y)
        s >>= 1
    return d


def _insertion_order(points, seed):
    """Seeded shuffle followed by a stable Hilbert sort for short point-location walks."""
    perm = np.random.default_rng(seed).permutation(len(points))
    keys = _hilbert_keys(points[perm])
    return perm[np.argsort(keys, kind="stable")]


def delaunay(points, seed: int = INSERTION_SEED) -> Triangulation:
    """Delaunay triangulation of 2-D points by incremental insertion.

    Exact duplicates are dropped (first occurrence kept). Insertion order is
    a seeded shuffle refined by a Hilbert sort; cocircular ties are resolved
    by that order.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValidationError("points must have shape (n, 2)")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points must be finite")
    _, first = np.unique(pts, axis=0, return_index=True)
    verts = pts[np.sort(first)]
    if len(verts) < 3:
        raise DegenerateInputError(f"need at least 3 distinct points, got {len(verts)}")

    order = _insertion_order(verts, seed).tolist()
    X = verts[:, 0].tolist()
    Y = verts[:, 1].tolist()

    i0 = order[0]
    i1 = order[1]
    i2 = None
    for k in order[2:]:
        if orient(X[i0], Y[i0], X[i1], Y[i1], X[k], Y[k]) != 0.0:
            i2 = k
            break
    if i2 is None:
        raise DegenerateInputError("all points are collinear")
    if orient(X[i0], Y[i0], X[i1], Y[i1], X[i2], Y[i2]) < 0:
        i1, i2 = i2, i1

    # tv[t] = [a, b, c] ccw, ghost triangles contain _INF; tn[t][i] is the triangle opposite tv[t][i]
    tv = [[i0, i1, i2], [i1, i0, _INF], [i2, i1, _INF], [i0, i2, _INF]]
    tn = [[2, 3, 1], [3, 2, 0], [1, 3, 0], [2, 1, 0]]
    alive = [True, True, True, True]
    last = 0

    def in_conflict(t, px, py):
        a, b, c = tv[t]
        if c == _INF:
            u, v = a, b
        elif a == _INF:
            u, v = b, c
        elif b == _INF:
            u, v = c, a
        else:
            return incircle(X[a], Y[a], X[b], Y[b], X[c], Y[c], px, py) > 0.0
        # ghost (u, v, inf): the outer region lies to the left of u -> v
        o = orient(X[u], Y[u], X[v], Y[v], px, py)
        if o > 0.0:
            return True
        if o < 0.0:
            return False
        dot = (px - X[u]) * (X[v] - X[u]) + (py - Y[u]) * (Y[v] - Y[u])
        return 0.0 < dot < (X[v] - X[u]) ** 2 + (Y[v] - Y[u]) ** 2

    def locate(start, px, py):
        t = start
        if _INF in tv[t]:
            t = tn[t][tv[t].index(_INF)]
        guard = 0
        while True:
            a, b, c = tv[t]
            if _INF in (a, b, c):
                return t
            if orient(X[b], Y[b], X[c], Y[c], px, py) < 0.0:
                t = tn[t][0]
            elif orient(X[c], Y[c], X[a], Y[a], px, py) < 0.0:
                t = tn[t][1]
            elif orient(X[a], Y[a], X[b], Y[b], px, py) < 0.0:
                t = tn[t][2]
            else:
                return t
            guard += 1
            if guard > 4 * len(tv) + 16:
                raise RuntimeError("point location did not terminate")

    placed = {i0, i1, i2}
    for p in order:
        if p in placed:
            continue
        px, py = X[p], Y[p]
        t0 = locate(last, px, py)
        cavity = {t0}
        stack = [t0]
        boundary = []  # (edge start, edge end, outside triangle)
        while stack:
            t = stack.pop()
            verts_t = tv[t]
            for i in range(3):
                nb = tn[t][i]
                if nb in cavity:
                    continue
                if in_conflict(nb, px, py):
                    cavity.add(nb)
                    stack.append(nb)
                else:
                    boundary.append((verts_t[(i + 1) % 3], verts_t[(i + 2) % 3], nb))
        # the boundary could also list an edge whose neighbour joined the cavity later
        boundary = [e for e in boundary if e[2] not in cavity]
        for t in cavity:
            alive[t] = False
        first_at = {}
        new_tris = []
        for u, v, outside in boundary:
            t = len(tv)
            tv.append([u, v, p])
            tn.append([-1, -1, outside])
            alive.append(True)
            # fix the back-pointer in the outside triangle across edge (v, u)
            ov = tv[outside]
            for j in range(3):
                if ov[(j + 1) % 3] == v and ov[(j + 2) % 3] == u:
                    tn[outside][j] = t
                    break
            first_at[u] = t
            new_tris.append(t)
        for t in new_tris:
            u, v, _ = tv[t]
            # across edge (v, p) is the new triangle whose boundary edge starts at v
            nb = first_at[v]
            tn[t][0] = nb
            tn[nb][1] = t
        last = new_tris[-1]
        placed.add(p)

    tris = [t for t, ok in zip(tv, alive) if ok and _INF not in t]
    return Triangulation(verts, np.array(tris, dtype=np.int64).reshape(-1, 3))


class _Grid:
    """Uniform grid mapping each cell to the kept triangles whose bounding box meets it."""

    def __init__(self, points, triangles, cell, lo, shape):
        self.cell = float(cell)
        self.lo = np.asarray(lo, dtype=float)
        self.shape = tuple(int(s) for s in shape)
        nx, ny = self.shape
        if len(triangles):
            p = points[triangles]
            tlo = np.floor((p.min(axis=1) - self.lo) / self.cell).astype(np.int64)
            thi = np.floor((p.max(axis=1) - self.lo) / self.cell).astype(np.int64)
            tlo = np.clip(tlo, 0, [nx - 1, ny - 1])
            thi = np.clip(thi, 0, [nx - 1, ny - 1])
            spans_x = thi[:, 0] - tlo[:, 0] + 1
            spans_y = thi[:, 1] - tlo[:, 1] + 1
            counts = spans_x * spans_y
            tri_id = np.repeat(np.arange(len(triangles)), counts)
            local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            sx = np.repeat(spans_x, counts)
            cx = np.repeat(tlo[:, 0], counts) + local % sx
            cy = np.repeat(tlo[:, 1], counts) + local // sx
            cell_id = cx * ny + cy
            order = np.argsort(cell_id, kind="stable")
            self.items = tri_id[order]
            self.offsets = np.searchsorted(cell_id[order], np.arange(nx * ny + 1))
        else:
            self.items = np.empty(0, dtype=np.int64)
            self.offsets = np.zeros(nx * ny + 1, dtype=np.int64)

    def cells_of(self, q):
        g = np.floor((q - self.lo) / self.cell)
        inside = (g[:, 0] >= 0) & (g[:, 1] >= 0) & (g[:, 0] < self.shape[0]) & (g[:, 1] < self.shape[1])
        gi = np.where(inside[:, None], g, 0).astype(np.int64)
        return gi[:, 0] * self.shape[1] + gi[:, 1], inside

    def candidates(self, cell_id):
        return self.items[self.offsets[cell_id]:self.offsets[cell_id + 1]]


def _point_in_triangles(q, tri_pts):
    """Barycentric sign test with tolerance; q (k, 2), tri_pts (k, 3, 2) -> (k,) bool."""
    a, b, c = tri_pts[:, 0], tri_pts[:, 1], tri_pts[:, 2]

    def side(u, v):
        l = (v[:, 0] - u[:, 0]) * (q[:, 1] - u[:, 1])
        r = (v[:, 1] - u[:, 1]) * (q[:, 0] - u[:, 0])
        return l - r, PREDICATE_RTOL * (np.abs(l) + np.abs(r))

    s1, e1 = side(a, b)
    s2, e2 = side(b, c)
    s3, e3 = side(c, a)
    return (s1 >= -e1) & (s2 >= -e2) & (s3 >= -e3)


@dataclass(frozen=True, eq=False)
class AlphaShape:
    alpha: float
    triangulation: Triangulation
    kept: np.ndarray  # indices into triangulation.triangles
    grid: _Grid

    @property
    def vertices(self):
        return self.triangulation.vertices

    @property
    def kept_triangles(self):
        return self.triangulation.triangles[self.kept]

    def area(self):
        return float(self.triangulation.areas()[self.kept].sum())

    def contains(self, x):
        """Membership of one point (bool) or a batch ``(k, 2)`` (bool array)."""
        q = np.asarray(x, dtype=float)
        single = q.ndim == 1
        q = np.atleast_2d(q)
        if q.shape[1] != 2:
            raise ValidationError("alpha shapes are two-dimensional")
        out = np.zeros(len(q), dtype=bool)
        cell_id, inside = self.grid.cells_of(q)
        qi = np.nonzero(inside)[0]
        if len(qi):
            starts = self.grid.offsets[cell_id[qi]]
            counts = self.grid.offsets[cell_id[qi] + 1] - starts
            pair_q = np.repeat(qi, counts)
            local = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
            pair_t = self.grid.items[np.repeat(starts, counts) + local]
            tris = self.kept_triangles[pair_t]
            hit = _point_in_triangles(q[pair_q], self.vertices[tris])
            out[pair_q[hit]] = True
        return bool(out[0]) if single else out

    def contains_bruteforce(self, x):
        """Reference membership: scan every kept triangle."""
        q = np.atleast_2d(np.asarray(x, dtype=float))
        tri_pts = self.vertices[self.kept_triangles]
        out = np.zeros(len(q), dtype=bool)
        for k, point in enumerate(q):
            if len(tri_pts):
                out[k] = _point_in_triangles(np.repeat(point[None], len(tri_pts), axis=0), tri_pts).any()
        return out

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "vertices": self.vertices.tolist(),
            "triangles": self.kept_triangles.tolist(),
        }


def grid_cell_size(points, alpha):
    lo, hi = points.min(axis=0), points.max(axis=0)
    diag = float(np.hypot(*(hi - lo)))
    if diag == 0.0:
        return 1.0
    return min(max(alpha, diag / 1024), diag / 8)


def shape_from_triangulation(tri: Triangulation, alpha: float) -> AlphaShape:
    if not alpha > 0:
        raise ValidationError("alpha must be > 0")
    radii = circumradii(tri.vertices, tri.triangles)
    kept = np.nonzero(radii <= alpha)[0]
    cell = grid_cell_size(tri.vertices, alpha)
    lo = tri.vertices.min(axis=0)
    span = tri.vertices.max(axis=0) - lo
    shape = np.maximum(np.floor(span / cell).astype(np.int64) + 1, 1)
    grid = _Grid(tri.vertices, tri.triangles[kept], cell, lo, shape)
    return AlphaShape(float(alpha), tri, kept, grid)


def build_alpha_shape(points, alpha: float) -> AlphaShape:
    """Alpha shape of ``points``: Delaunay triangles with circumradius <= alpha."""
    if not alpha > 0:
        raise ValidationError("alpha must be > 0")
    return shape_from_triangulation(delaunay(points), alpha)


def save_shape(shape: AlphaShape, path) -> None:
    Path(path).write_text(json.dumps(shape.to_dict()) + "\n")


def load_shape(path) -> AlphaShape:
    """Rebuild a shape from its exported vertices and kept triangles."""
    try:
        doc = json.loads(Path(path).read_text())
        alpha = float(doc["alpha"])
        verts = np.asarray(doc["vertices"], dtype=float).reshape(-1, 2)
        tris = np.asarray(doc["triangles"], dtype=np.int64).reshape(-1, 3)
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise SchemaError(f"invalid shape file: {exc}") from None
    if len(tris) and (tris.min() < 0 or tris.max() >= len(verts)):
        raise SchemaError("triangle index out of range")
    if len(verts) == 0:
        raise SchemaError("shape has no vertices")
    tri = Triangulation(verts, tris)
    cell = grid_cell_size(verts, alpha)
    lo = verts.min(axis=0)
    shape = np.maximum(np.floor((verts.max(axis=0) - lo) / cell).astype(np.int64) + 1, 1)
    kept = np.arange(len(tris))
    return AlphaShape(alpha, tri, kept, _Grid(verts, tris, cell, lo, shape))
