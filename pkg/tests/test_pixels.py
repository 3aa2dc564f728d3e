"""Stage 4 pixel fill: hole-free guarantee and oracle equivalence."""

import numpy as np
import pytest

from labelcollage import (
    BORDER,
    InstanceMap,
    LabelMap,
    build_record,
    fill_pixels,
    pixel_window,
    resize_labels,
)
from labelcollage.canvas import Canvas, STAGE_PIXEL
from labelcollage.index import ExemplarLibrary
from labelcollage.pixels import LOWRES, SEARCH_RADIUS, WINDOW
from labelcollage import pngio, toygen

from conftest import SMALL_SPEC


def _one_scene_library(tmp_path, size=128, seed=4, name="pixdata"):
    rng = np.random.default_rng(seed)
    lab = rng.integers(0, 6, size=(size // 8, size // 8)).astype(np.uint16)
    lab = np.kron(lab, np.ones((8, 8), dtype=np.uint16))
    img = rng.integers(10, 240, size=(size, size, 3), dtype=np.uint8)
    root = tmp_path / name
    (root / "images").mkdir(parents=True, exist_ok=True)
    pngio.write_rgb(root / "images" / "000000.png", img)
    rec = build_record(0, "images/000000.png", LabelMap(lab, 8),
                       InstanceMap(np.zeros(lab.shape, np.uint16)))
    return ExemplarLibrary(root, [rec], 8, [f"c{i}" for i in range(8)]), img


def test_complete_canvas_is_noop(tmp_path):
    lib, img = _one_scene_library(tmp_path)
    rec = lib.record(0)
    canvas = Canvas(128, 128)
    canvas.filled[:] = True
    canvas.image[:] = 99
    before = canvas.image.copy()
    report = fill_pixels(rec.labels, [0], lib, canvas)
    assert report.pixels_written == 0
    assert (canvas.image == before).all()


def test_self_query_hole_filled_exactly(tmp_path):
    # Query size equals LOWRES so donor coordinates land on integer
    # positions and the bilinear readback is exact.
    lib, img = _one_scene_library(tmp_path, size=128)
    rec = lib.record(0)
    canvas = Canvas(128, 128)
    canvas.filled[:] = True
    canvas.filled[60, 70] = False
    report = fill_pixels(rec.labels, [0], lib, canvas, collect_picks=True)
    assert report.pixels_written == 1
    assert canvas.filled.all()
    assert (canvas.image[60, 70] == img[60, 70]).all()
    picks = {(ci, cj): (rank, di, dj, score) for ci, cj, rank, di, dj, score in report.picks}
    rank, di, dj, score = picks[(60, 70)]
    assert (rank, di, dj) == (0, 0, 0)
    assert score == WINDOW * WINDOW


def test_hole_free_guarantee_even_without_matches(tmp_path, small_lib):
    # Query with every pixel unlabeled: windows never match anything, yet
    # the clipped 5x5 search always yields some winner.
    from conftest import blank_maps

    labels, _ = blank_maps(64, 64, num_categories=SMALL_SPEC.categories)
    canvas = Canvas(64, 64)
    report = fill_pixels(labels, list(range(len(small_lib))), small_lib, canvas)
    assert canvas.filled.all()
    assert report.pixels_written == 64 * 64
    assert (canvas.stage == STAGE_PIXEL).all()


def test_empty_top_matches_rejected(tmp_path):
    lib, _ = _one_scene_library(tmp_path)
    canvas = Canvas(32, 32)
    with pytest.raises(ValueError):
        fill_pixels(lib.record(0).labels, [], lib, canvas)


def test_pixel_window_reference_form():
    m = np.arange(LOWRES * LOWRES, dtype=np.uint16).reshape(LOWRES, LOWRES) % 97
    w = pixel_window(m, 0, 0)
    assert w.shape == (WINDOW * WINDOW,)
    # top-left corner: rows/cols before the map are BORDER
    assert (w.reshape(WINDOW, WINDOW)[:5, :] == BORDER).all()
    assert (w.reshape(WINDOW, WINDOW)[5:, 5:] == m[:6, :6]).all()


def test_winner_matches_exhaustive_oracle(small_lib):
    """Every searched cell's winner equals direct enumeration over all
    (exemplar, 5x5 offset) pairs, including rank/scan tie-breaks."""
    q_labels, _ = toygen.scene_maps(SMALL_SPEC, 777, seed_salt=31)
    canvas = Canvas(q_labels.height, q_labels.width)
    rng = np.random.default_rng(0)
    keep = rng.random(canvas.filled.shape) < 0.97
    canvas.filled[:] = keep  # ~3% scattered holes
    ranks = [2, 0, 5]  # arbitrary subset, non-sorted on purpose
    report = fill_pixels(q_labels, ranks, small_lib, canvas, collect_picks=True)
    assert canvas.filled.all()

    q128 = resize_labels(q_labels, LOWRES, LOWRES).data
    maps = [small_lib.record(ex).lowres128.data for ex in ranks]
    checked = 0
    for (ci, cj, rank, di, dj, score) in report.picks[:80]:
        q_win = pixel_window(q128, ci, cj)
        best = None
        for r, m in enumerate(maps):
            for ddi in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1):
                for ddj in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1):
                    ti, tj = ci + ddi, cj + ddj
                    if not (0 <= ti < LOWRES and 0 <= tj < LOWRES):
                        continue
                    s = int((q_win == pixel_window(m, ti, tj)).sum())
                    key = (-s, r, ti, tj)
                    if best is None or key < best:
                        best = key
        assert best == (-score, rank, ci + di, cj + dj)
        checked += 1
    assert checked >= 50


def test_monotonic_fill_only_previously_unfilled(small_lib):
    q_labels, _ = toygen.scene_maps(SMALL_SPEC, 778, seed_salt=31)
    canvas = Canvas(q_labels.height, q_labels.width)
    rng = np.random.default_rng(1)
    canvas.filled[:] = rng.random(canvas.filled.shape) < 0.5
    canvas.image[canvas.filled] = 123
    before_filled = canvas.filled.copy()
    fill_pixels(q_labels, [0, 1], small_lib, canvas)
    assert canvas.filled.all()
    assert (canvas.image[before_filled] == 123).all()


def test_scores_bounded(small_lib):
    q_labels, _ = toygen.scene_maps(SMALL_SPEC, 779, seed_salt=31)
    canvas = Canvas(q_labels.height, q_labels.width)
    report = fill_pixels(q_labels, [0, 3], small_lib, canvas, collect_picks=True)
    for (_, _, _, di, dj, score) in report.picks:
        assert 0 <= score <= WINDOW * WINDOW
        assert abs(di) <= SEARCH_RADIUS and abs(dj) <= SEARCH_RADIUS
