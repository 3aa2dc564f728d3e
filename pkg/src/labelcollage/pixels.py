"""Stage 4: residual hole filling by per-pixel label-window matching.

Every remaining unfilled pixel maps to a cell of the query's 128x128
label map. The cell's 11x11 label window (BORDER outside the map) is
compared against each top-N exemplar's 128x128 map over the 5x5 cell
neighborhood; the count of agreeing entries decides the winner, ties
break by global rank then source cell row then column. Because the 5x5
neighborhood always contains at least one in-bounds position, a winner
always exists and the output is hole-free.

A window comparison at every map position is a box filter over a shifted
equality map, so all scores for one (exemplar, offset) pair come from
one integral image rather than 128x128 gather operations.
"""

from __future__ import annotations

import numpy as np

from .canvas import Canvas, FillReport, STAGE_PIXEL
from .index import ExemplarLibrary
from .raster import BORDER, LabelMap, bilinear_sample_u8, resize_labels

LOWRES = 128
WINDOW = 11
HALF = WINDOW // 2       # 5
SEARCH_RADIUS = 2        # 5x5 cell window
_PAD = HALF + SEARCH_RADIUS


def pixel_window(map128: np.ndarray, row: int, col: int) -> np.ndarray:
    """The 11x11 label window centered on one low-res cell (BORDER
    outside the map); reference form used by tests and the service."""
    padded = np.full((LOWRES + 2 * HALF, LOWRES + 2 * HALF), BORDER, dtype=np.uint16)
    padded[HALF:-HALF, HALF:-HALF] = map128
    return padded[row : row + WINDOW, col : col + WINDOW].ravel().copy()


def _box_sum(eq: np.ndarray) -> np.ndarray:
    """Sum of each 11x11 window of eq, evaluated at all LOWRES positions.

    eq has shape (LOWRES + 2*_PAD - 2*SEARCH_RADIUS,) square = padded by
    HALF on each side; output (i, j) sums eq[i : i+WINDOW, j : j+WINDOW].
    """
    ii = np.zeros((eq.shape[0] + 1, eq.shape[1] + 1), dtype=np.int32)
    np.cumsum(eq, axis=0, out=ii[1:, 1:])
    np.cumsum(ii[1:, 1:], axis=1, out=ii[1:, 1:])
    return (
        ii[WINDOW:, WINDOW:]
        - ii[:-WINDOW, WINDOW:]
        - ii[WINDOW:, :-WINDOW]
        + ii[:-WINDOW, :-WINDOW]
    )


def _score_maps(q128: np.ndarray, e128: np.ndarray):
    """Best score/offset per query cell against one exemplar map.

    Returns (score, di, dj) arrays of shape (LOWRES, LOWRES); offsets are
    ordered so np.argmax's first-max rule realizes the row-then-column
    tie-break.
    """
    qpad = np.full((LOWRES + 2 * HALF, LOWRES + 2 * HALF), BORDER, dtype=np.uint16)
    qpad[HALF:-HALF, HALF:-HALF] = q128
    epad = np.full((LOWRES + 2 * _PAD, LOWRES + 2 * _PAD), BORDER, dtype=np.uint16)
    epad[_PAD:-_PAD, _PAD:-_PAD] = e128

    span = LOWRES + 2 * HALF
    scores = np.empty((25, LOWRES, LOWRES), dtype=np.int32)
    rows = np.arange(LOWRES)
    for t in range(25):
        di = t // 5 - SEARCH_RADIUS
        dj = t % 5 - SEARCH_RADIUS
        shifted = epad[SEARCH_RADIUS + di : SEARCH_RADIUS + di + span,
                       SEARCH_RADIUS + dj : SEARCH_RADIUS + dj + span]
        s = _box_sum(qpad == shifted)
        # Out-of-bounds window centers cannot donate RGB: mask them out.
        if di < 0:
            s[: -di, :] = -1
        elif di > 0:
            s[-di:, :] = -1
        if dj < 0:
            s[:, : -dj] = -1
        elif dj > 0:
            s[:, -dj:] = -1
        scores[t] = s
    best_t = scores.argmax(axis=0)
    best = scores[best_t, rows[:, None], rows[None, :]]
    return best, (best_t // 5 - SEARCH_RADIUS), (best_t % 5 - SEARCH_RADIUS)


def fill_pixels(query_labels: LabelMap, top_matches, lib: ExemplarLibrary,
                canvas: Canvas, collect_picks: bool = False) -> FillReport:
    """Fill every remaining unfilled pixel from the top-N exemplars."""
    report = FillReport(stage=STAGE_PIXEL)
    open_r, open_c = np.nonzero(~canvas.filled)
    if open_r.size == 0:
        return report
    ranks = [m.exemplar_id if hasattr(m, "exemplar_id") else int(m) for m in top_matches]
    if not ranks:
        raise ValueError("pixel fill needs at least one exemplar match")

    q128 = resize_labels(query_labels, LOWRES, LOWRES).data

    best_score = np.full((LOWRES, LOWRES), -1, dtype=np.int32)
    best_rank = np.zeros((LOWRES, LOWRES), dtype=np.int32)
    best_di = np.zeros((LOWRES, LOWRES), dtype=np.int8)
    best_dj = np.zeros((LOWRES, LOWRES), dtype=np.int8)
    for rank, ex in enumerate(ranks):
        score, di, dj = _score_maps(q128, lib.record(ex).lowres128.data)
        better = score > best_score
        if better.any():
            best_score[better] = score[better]
            best_rank[better] = rank
            best_di[better] = di[better]
            best_dj[better] = dj[better]

    h, w = canvas.shape
    y = (open_r + 0.5) * LOWRES / h
    x = (open_c + 0.5) * LOWRES / w
    cell_i = np.minimum(y.astype(np.intp), LOWRES - 1)
    cell_j = np.minimum(x.astype(np.intp), LOWRES - 1)
    frac_r = y - cell_i
    frac_c = x - cell_j

    pix_rank = best_rank[cell_i, cell_j]
    src_i = cell_i + best_di[cell_i, cell_j]
    src_j = cell_j + best_dj[cell_i, cell_j]

    if collect_picks:
        cells = np.unique(cell_i * LOWRES + cell_j)
        report.picks = [
            (int(ci), int(cj), int(best_rank[ci, cj]),
             int(best_di[ci, cj]), int(best_dj[ci, cj]), int(best_score[ci, cj]))
            for ci, cj in zip(cells // LOWRES, cells % LOWRES)
        ]

    for rank, ex in enumerate(ranks):
        sel = pix_rank == rank
        if not sel.any():
            continue
        image = lib.image(ex)
        eh, ew = image.shape[:2]
        donor_r = (src_i[sel] + frac_r[sel]) * eh / LOWRES - 0.5
        donor_c = (src_j[sel] + frac_c[sel]) * ew / LOWRES - 0.5
        rgb = bilinear_sample_u8(image, donor_r, donor_c)
        report.pixels_written += canvas.write(
            open_r[sel], open_c[sel], rgb, STAGE_PIXEL, ex,
            donor_r.astype(np.float32), donor_c.astype(np.float32),
        )
    return report
