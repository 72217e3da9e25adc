"""SVG plots are well-formed and use the agreed colors."""

import xml.etree.ElementTree as ET

import numpy as np

from manifold_explain import svg
from manifold_explain.alpha_shape import build_alpha_shape

NS = "{http://www.w3.org/2000/svg}"


def square_shape():
    return build_alpha_shape(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]), alpha=10.0)


def test_boundary_edges_of_square():
    e = svg.boundary_edges(square_shape())
    assert len(e) == 4


def test_boundary_edges_empty():
    shape = build_alpha_shape(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), alpha=0.1)
    assert svg.boundary_edges(shape).shape == (0, 2)


def test_sampling_plot_parses():
    rng = np.random.default_rng(0)
    acc, rej = rng.uniform(size=(30, 2)), rng.uniform(size=(10, 2)) + 0.5
    text = svg.sampling_plot((0.5, 0.5), acc, rej, square_shape(), cloud=rng.uniform(size=(50, 2)), label="p")
    root = ET.fromstring(text)
    assert root.tag == f"{NS}svg"
    fills = [g.get("fill") for g in root.iter(f"{NS}g")]
    assert svg.GRAY in fills and svg.RED in fills and svg.CLOUD in fills
    red = next(g for g in root.iter(f"{NS}g") if g.get("fill") == svg.RED)
    assert len(list(red)) == 30
    assert any(t.text == "p" for t in root.iter(f"{NS}text"))


def test_window_clips_points():
    acc = np.array([[0.0, 0.0], [100.0, 100.0]])
    root = ET.fromstring(svg.sampling_plot((0.0, 0.0), acc, window=1.0))
    red = next(g for g in root.iter(f"{NS}g") if g.get("fill") == svg.RED)
    assert len(list(red)) == 1


def test_overview_and_fidelity(tmp_path):
    rng = np.random.default_rng(1)
    cloud = rng.uniform(size=(100, 2))
    text = svg.overview_plot(cloud, square_shape(), {"a": (0.2, 0.2), "b": (0.8, 0.8)})
    ET.fromstring(text)
    fid = svg.fidelity_plot(rng.normal(size=20), rng.normal(size=20))
    ET.fromstring(fid)
    path = tmp_path / "o.svg"
    svg.write_svg(text, path)
    assert path.read_text() == text
