"""Delaunay triangulation, circumradius filter and membership queries."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manifold_explain.alpha_shape import (
    AlphaShape,
    build_alpha_shape,
    circumradius,
    circumradii,
    delaunay,
    load_shape,
    save_shape,
    shape_from_triangulation,
)
from manifold_explain.errors import DegenerateInputError, SchemaError, ValidationError
from manifold_explain.spiral_data import spiral_point

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def hull_area(points):
    """Monotone-chain convex hull area (independent of the triangulation)."""
    pts = sorted(map(tuple, np.unique(points, axis=0)))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = np.array(lower[:-1] + upper[:-1])
    x, y = hull[:, 0], hull[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def circumcenter(a, b, c):
    """Circumcenter by solving the perpendicular-bisector system."""
    m = np.array([b - a, c - a], dtype=float)
    rhs = 0.5 * np.array([np.dot(b, b) - np.dot(a, a), np.dot(c, c) - np.dot(a, a)])
    return np.linalg.solve(m, rhs)


def empty_circle_violations(tri, tol=1e-9):
    """Brute force over every (triangle, vertex) pair."""
    v = tri.vertices
    bad = 0
    for t in tri.triangles:
        a, b, c = v[t]
        center = circumcenter(a, b, c)
        r = np.linalg.norm(a - center)
        d = np.linalg.norm(v - center, axis=1)
        others = np.ones(len(v), dtype=bool)
        others[t] = False
        bad += int(np.sum(d[others] < r * (1 - tol)))
    return bad


def inside_matrix(q, tris, eps=1e-12):
    """Barycentric test written independently of the library: ``(probes, triangles)`` booleans."""
    a, b, c = (tris[None, :, k, :] for k in range(3))
    q = q[:, None, :]
    det = (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (c[..., 0] - a[..., 0]) * (b[..., 1] - a[..., 1])
    l1 = ((b[..., 0] - q[..., 0]) * (c[..., 1] - q[..., 1]) - (c[..., 0] - q[..., 0]) * (b[..., 1] - q[..., 1])) / det
    l2 = ((c[..., 0] - q[..., 0]) * (a[..., 1] - q[..., 1]) - (a[..., 0] - q[..., 0]) * (c[..., 1] - q[..., 1])) / det
    l3 = 1.0 - l1 - l2
    return np.minimum(np.minimum(l1, l2), l3) >= -eps


class TestCircumradius:
    def test_right_triangle(self):
        assert circumradius((0, 0), (1, 0), (0, 1)) == pytest.approx(math.sqrt(2) / 2, abs=1e-12)

    def test_equilateral_cross_check(self):
        a, b, c = np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.5, math.sqrt(3) / 2])
        r = circumradius(a, b, c)
        assert r == pytest.approx(0.57735, abs=1e-5)
        center = circumcenter(a, b, c)
        for p in (a, b, c):
            assert np.linalg.norm(p - center) == pytest.approx(r, rel=1e-12)

    def test_collinear_raises(self):
        with pytest.raises(DegenerateInputError):
            circumradius((0, 0), (1, 0), (2, 0))

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(30, 2))
        tris = np.array([[0, 1, 2], [3, 4, 5], [10, 20, 29]])
        expected = [circumradius(*pts[t]) for t in tris]
        np.testing.assert_allclose(circumradii(pts, tris), expected, rtol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=6, max_size=6))
    def test_matches_circumcenter_distance(self, coords):
        a, b, c = np.array(coords).reshape(3, 2)
        area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        scale = max(np.ptp(np.array([a, b, c]), axis=0).max(), 1e-9)
        if area2 < 1e-3 * scale * scale:
            return  # too close to collinear for a meaningful comparison
        center = circumcenter(a, b, c)
        assert circumradius(a, b, c) == pytest.approx(np.linalg.norm(a - center), rel=1e-7)


class TestDelaunay:
    def test_square(self):
        tri = delaunay(SQUARE)
        assert len(tri.triangles) == 2
        assert tri.areas().sum() == pytest.approx(1.0)

    def test_three_points(self):
        tri = delaunay([[0, 0], [2, 0], [0, 1]])
        assert len(tri.triangles) == 1
        assert tri.areas()[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("pts", [[[0, 0], [1, 1]], [[0, 0], [1, 1], [2, 2], [3, 3]], [[1, 1], [1, 1], [1, 1], [2, 2]]])
    def test_degenerate(self, pts):
        with pytest.raises(DegenerateInputError):
            delaunay(pts)

    def test_invalid_shape(self):
        with pytest.raises(ValidationError):
            delaunay(np.zeros((5, 3)))
        with pytest.raises(ValidationError):
            delaunay([[0, 0], [1, 0], [np.nan, 1]])

    def test_duplicates_dropped(self):
        pts = np.vstack([SQUARE, SQUARE[:2]])
        tri = delaunay(pts)
        assert len(tri.vertices) == 4 and len(tri.triangles) == 2

    @pytest.mark.parametrize("seed", range(10))
    def test_random_sets(self, seed):
        pts = np.random.default_rng(seed).uniform(-5, 5, size=(50, 2))
        tri = delaunay(pts)
        assert empty_circle_violations(tri) == 0
        assert np.all(tri.areas() > 0)  # counterclockwise
        assert tri.areas().sum() == pytest.approx(hull_area(pts), rel=1e-12)
        # Euler: t = 2n - 2 - h for a triangulation of the hull
        edges = np.sort(np.concatenate([tri.triangles[:, [0, 1]], tri.triangles[:, [1, 2]], tri.triangles[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        assert counts.max() <= 2
        hull_edges = int(np.sum(counts == 1))
        assert len(tri.triangles) == 2 * len(pts) - 2 - hull_edges

    def test_grid_points_cocircular(self):
        g = np.stack(np.meshgrid(np.arange(6.0), np.arange(5.0)), -1).reshape(-1, 2)
        tri = delaunay(g)
        assert len(tri.triangles) == 2 * 5 * 4
        assert tri.areas().sum() == pytest.approx(20.0)
        assert empty_circle_violations(tri) == 0

    def test_deterministic(self):
        pts = np.random.default_rng(3).normal(size=(200, 2))
        assert np.array_equal(delaunay(pts).triangles, delaunay(pts).triangles)

    def test_matches_scipy(self):
        spatial = pytest.importorskip("scipy.spatial")
        pts = np.random.default_rng(4).normal(size=(500, 2))
        ours = {tuple(sorted(t)) for t in delaunay(pts).triangles.tolist()}
        ref = {tuple(sorted(t)) for t in spatial.Delaunay(pts).simplices.tolist()}
        assert ours == ref


@pytest.fixture(scope="module")
def cloud():
    rng = np.random.default_rng(7)
    theta = rng.uniform(0, 4 * np.pi, 1500)
    return spiral_point(theta) + rng.normal(scale=0.3, size=(1500, 2))


class TestAlphaShape:
    def test_square_large_alpha_keeps_hull(self):
        shape = build_alpha_shape(SQUARE, 10.0)
        assert len(shape.kept) == 2 and shape.area() == pytest.approx(1.0)

    def test_square_small_alpha_empty(self):
        shape = build_alpha_shape(SQUARE, 0.1)
        assert len(shape.kept) == 0
        assert not shape.contains([0.5, 0.5])
        assert not shape.contains(np.array([[0.5, 0.5], [0.1, 0.1]])).any()

    def test_invalid_alpha(self):
        with pytest.raises(ValidationError):
            build_alpha_shape(SQUARE, 0.0)

    def test_kept_radii_bounded(self, cloud):
        shape = build_alpha_shape(cloud, 0.8)
        radii = circumradii(shape.vertices, shape.kept_triangles)
        assert np.all(radii <= 0.8)
        all_radii = circumradii(shape.vertices, shape.triangulation.triangles)
        assert np.sum(all_radii <= 0.8) == len(shape.kept)

    def test_monotone_in_alpha(self, cloud):
        tri = delaunay(cloud)
        prev = set()
        for alpha in (0.2, 0.5, 1.0, 2.0, 1e9):
            kept = set(shape_from_triangulation(tri, alpha).kept.tolist())
            assert prev <= kept
            prev = kept
        assert len(prev) == len(tri.triangles)

    def test_centroids_inside_and_far_points_outside(self, cloud):
        shape = build_alpha_shape(cloud, 1.0)
        centroids = shape.vertices[shape.kept_triangles].mean(axis=1)
        assert shape.contains(centroids).all()
        lo, hi = cloud.min(axis=0), cloud.max(axis=0)
        outside = np.array([lo - 1, hi + 1, [lo[0] - 5, 0], [0, hi[1] + 0.01]])
        assert not shape.contains(outside).any()

    def test_grid_equals_brute_force(self, cloud):
        shape = build_alpha_shape(cloud, 1.0)
        probes = np.random.default_rng(8).uniform(cloud.min(axis=0) - 1, cloud.max(axis=0) + 1, size=(10_000, 2))
        assert np.array_equal(shape.contains(probes), shape.contains_bruteforce(probes))

    def test_contains_matches_independent_oracle(self, cloud):
        shape = build_alpha_shape(cloud, 1.0)
        probes = np.random.default_rng(9).uniform(-13, 13, size=(300, 2))
        tris = shape.vertices[shape.kept_triangles]
        expected = inside_matrix(probes, tris).any(axis=1)
        assert np.array_equal(shape.contains(probes), expected)

    def test_grid_candidates_superset(self, cloud):
        shape = build_alpha_shape(cloud, 1.0)
        probes = np.random.default_rng(10).uniform(-13, 13, size=(2000, 2))
        tris = shape.vertices[shape.kept_triangles]
        cells, inside = shape.grid.cells_of(probes)
        hit_matrix = inside_matrix(probes, tris, eps=0.0)
        for row, cell, ok in zip(hit_matrix, cells, inside):
            hits = set(np.nonzero(row)[0].tolist())
            if not ok:
                assert not hits
                continue
            assert hits <= set(shape.grid.candidates(cell).tolist())

    def test_single_point_query_and_boundary(self):
        shape = build_alpha_shape(SQUARE, 10.0)
        assert shape.contains([0.5, 0.5]) is True
        assert shape.contains([1.0, 0.5]) is True  # boundary counts as inside
        assert shape.contains([0.0, 0.0]) is True
        assert shape.contains([1.0 + 1e-6, 0.5]) is False
        with pytest.raises(ValidationError):
            shape.contains([1.0, 2.0, 3.0])

    def test_kept_region_within_two_alpha(self, cloud):
        alpha = 0.7
        shape = build_alpha_shape(cloud, alpha)
        rng = np.random.default_rng(11)
        tris = shape.vertices[shape.kept_triangles]
        w = rng.dirichlet(np.ones(3), size=len(tris))
        inner = np.einsum("tk,tkd->td", w, tris)
        for chunk in np.array_split(inner, 20):
            d = np.min(np.linalg.norm(chunk[:, None, :] - cloud[None, :, :], axis=2), axis=1)
            assert np.all(d <= 2 * alpha)

    def test_permutation_invariant(self, cloud):
        perm = np.random.default_rng(12).permutation(len(cloud))
        a = build_alpha_shape(cloud, 1.0)
        b = build_alpha_shape(cloud[perm], 1.0)
        probes = np.random.default_rng(13).uniform(-13, 13, size=(5000, 2))
        assert np.array_equal(a.contains(probes), b.contains(probes))
        assert a.area() == pytest.approx(b.area(), rel=1e-12)

    def test_save_load_round_trip(self, cloud, tmp_path):
        shape = build_alpha_shape(cloud, 1.0)
        path = tmp_path / "s.json"
        save_shape(shape, path)
        back = load_shape(path)
        assert isinstance(back, AlphaShape)
        probes = np.random.default_rng(14).uniform(-13, 13, size=(3000, 2))
        assert np.array_equal(shape.contains(probes), back.contains(probes))

    @pytest.mark.parametrize("text", ["{", '{"alpha": 1}', '{"alpha": 1, "vertices": [], "triangles": []}', '{"alpha": 1, "vertices": [[0,0],[1,0],[0,1]], "triangles": [[0,1,7]]}'])
    def test_load_schema_errors(self, tmp_path, text):
        path = tmp_path / "s.json"
        path.write_text(text)
        with pytest.raises(SchemaError):
            load_shape(path)


class TestSpiralShape:
    def test_arm_gaps_excluded(self, spiral_pipeline):
        shape = spiral_pipeline.shape
        theta = np.linspace(2 * np.pi, 6 * np.pi, 400)
        # midway between the arm at radius theta and the next one at theta + 2*pi
        gaps = np.stack([(theta + np.pi) * np.cos(theta), (theta + np.pi) * np.sin(theta)], axis=1)
        assert not shape.contains(gaps).any()

    def test_arm_centres_included(self, spiral_pipeline):
        shape = spiral_pipeline.shape
        centres = spiral_point(np.linspace(2.0, 8 * np.pi - 0.5, 2000))
        assert shape.contains(centres).mean() > 0.99
