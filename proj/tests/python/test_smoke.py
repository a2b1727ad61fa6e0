import json
import math

import numpy as np
import pytest

import facmap


def test_geodesy():
    assert facmap.haversine_km(0.0, 0.0, 0.0, 1.0) == pytest.approx(111.195, abs=1e-3)
    x, y = facmap.project(29.7, -95.3)
    lat, lon = facmap.unproject(x, y)
    assert lat == pytest.approx(29.7, abs=1e-9)
    assert lon == pytest.approx(-95.3, abs=1e-9)
    with pytest.raises(ValueError):
        facmap.project(89.0, 0.0)


def test_tiles():
    col, row = facmap.tile_of(29.7, -95.3)
    x, y = facmap.project(29.7, -95.3)
    assert (col, row) == (math.floor(x / facmap.TILE_SIDE_M), math.floor(y / facmap.TILE_SIDE_M))
    tiles = facmap.enumerate_tiles(29.0, -95.1, 29.05, -95.0)
    assert len(tiles) == len(set(tiles)) > 0
    assert list(tiles) == sorted(tiles, key=lambda t: (t[1], t[0]))


def test_heuristic_score():
    dark = np.zeros((facmap.TILE_PIXELS, facmap.TILE_PIXELS, 3), dtype=np.uint8)
    assert facmap.heuristic_score(dark) == pytest.approx(1.0 / (1.0 + math.exp(4.0)))
    bright = np.full_like(dark, 255)
    assert facmap.heuristic_score(bright) > 0.99
    with pytest.raises((ValueError, TypeError)):
        facmap.heuristic_score(np.zeros((10, 10, 3), dtype=np.uint8))


def test_merge_and_metrics():
    dets = facmap.merge([(0, 0, 0.9), (1, 0, 0.6), (5, 5, 0.7), (3, 3, 0.1)], 0.5)
    assert [d["id"] for d in dets] == ["det_0_0", "det_5_5"]
    assert len(dets[0]["tiles"]) == 2
    assert dets[0]["max_probability"] == pytest.approx(0.9)
    diag = facmap.merge([(0, 0, 0.9), (1, 1, 0.9)], 0.5, adjacency="8")
    assert len(diag) == 1

    labels = [1] * 9 + [0] * 697
    probs = [0.9] * 9 + [0.8] * 3 + [0.1] * 694
    m = facmap.metrics(labels, probs, 0.5)
    assert m["precision"] == pytest.approx(0.75)
    assert m["recall"] == 1.0
    sel = facmap.select_threshold([1, 1, 0, 0], [0.83, 0.71, 0.4, 0.69])
    assert sel["threshold"] == pytest.approx(0.71)


def test_dedup():
    records = [
        ("oil_refinery", 30.0, -95.0, "a", "eia"),
        ("oil_refinery", 30.01, -95.0, "b", "hifld"),
        ("lng_terminal", 30.0, -95.0, "c", "gogi"),
    ]
    clusters = facmap.dedup(records, 2.0)
    assert len(clusters) == 2


def test_synthetic_world_roundtrip():
    world = facmap.generate_world(29.0, -95.4, 29.12, -95.0, seed=7, count=3, noise=0.5)
    spec = json.loads(world)
    assert len(spec["facilities"]) == 3
    dets = facmap.detect_world(world, 0.5, "4", 1)
    assert len(dets) == 3
    col, row = facmap.tile_of(spec["facilities"][0]["lat"], spec["facilities"][0]["lon"])
    img = facmap.render_tile(world, col, row)
    assert img.shape == (facmap.TILE_PIXELS, facmap.TILE_PIXELS, 3)
    assert facmap.heuristic_score(img) > 0.88
