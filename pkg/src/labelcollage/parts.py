"""Stage 3: local part matching over the retrieved shapes.

Shapes are resampled onto a 256x256 frame cut into a 16x16 grid of 16x16
patches. A patch descriptor concatenates the labels of its own patch and
the 8 surrounding patches (2304 entries; off-frame patches are BORDER).
For every grid cell that still contains unfilled shape pixels, all
candidates are searched over the 5x5 cell neighborhood around the same
coordinate, and the highest agreement count wins:

    S = sum_t [p_i[t] == p_j[t]]       in [0, 2304]

RGB is read from the winner's resampled frame at the query pixel's exact
sub-cell offset, so each output pixel keeps a single donor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .canvas import Canvas, FillReport, STAGE_PART
from .index import ExemplarLibrary
from .raster import BORDER, LabelMap, ShapeInstance, bilinear_resize_rgb, bilinear_sample_u8, nearest_resize
from .shapes import CandidateSet

log = logging.getLogger(__name__)

FRAME = 256
GRID = 16
PATCH = FRAME // GRID
DESC_LEN = PATCH * PATCH * 9
SEARCH_RADIUS = 2  # 5x5 cell window

# Descriptor patch order: center first, then the 8 neighbors clockwise
# from north.
NEIGHBOR_OFFSETS = ((0, 0), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1))


@dataclass(eq=False)
class PartGrid:
    """Resampled frame of one shape plus per-cell patch descriptors."""

    labels_frame: np.ndarray            # (FRAME, FRAME) uint16
    desc: np.ndarray                    # (GRID, GRID, DESC_LEN) uint16
    rgb_frame: np.ndarray | None = None # (FRAME, FRAME, 3) uint8, candidates only


def _grid_descriptors(frame: np.ndarray) -> np.ndarray:
    padded = np.full((FRAME + 2 * PATCH, FRAME + 2 * PATCH), BORDER, dtype=np.uint16)
    padded[PATCH:-PATCH, PATCH:-PATCH] = frame
    # blocks[bi, bj] is the 16x16 patch at padded grid position (bi, bj);
    # the frame's cell (i, j) is block (i+1, j+1).
    blocks = padded.reshape(GRID + 2, PATCH, GRID + 2, PATCH).transpose(0, 2, 1, 3)
    desc = np.empty((GRID, GRID, 9, PATCH * PATCH), dtype=np.uint16)
    for t, (di, dj) in enumerate(NEIGHBOR_OFFSETS):
        desc[:, :, t, :] = blocks[1 + di : 1 + di + GRID, 1 + dj : 1 + dj + GRID].reshape(GRID, GRID, -1)
    return desc.reshape(GRID, GRID, DESC_LEN)


def build_part_grid(shape: ShapeInstance, labels: LabelMap,
                    image: np.ndarray | None = None) -> PartGrid:
    """Resample a shape's label crop (and optionally RGB) to the frame."""
    r0, c0, rows, cols = shape.bbox
    crop = labels.data[r0 : r0 + rows, c0 : c0 + cols]
    frame = nearest_resize(crop, FRAME, FRAME).astype(np.uint16)
    rgb = None
    if image is not None:
        rgb = bilinear_resize_rgb(image[r0 : r0 + rows, c0 : c0 + cols], FRAME, FRAME)
    return PartGrid(labels_frame=frame, desc=_grid_descriptors(frame), rgb_frame=rgb)


def score_patch(p_i: np.ndarray, p_j: np.ndarray) -> int:
    a = np.asarray(p_i)
    b = np.asarray(p_j)
    if a.shape != (DESC_LEN,) or b.shape != (DESC_LEN,):
        raise ValueError(f"patch descriptors must have length {DESC_LEN}")
    return int((a == b).sum())


def part_grid_for(lib: ExemplarLibrary, exemplar_id: int, shape_id: int) -> PartGrid:
    cache = lib.stage_caches.setdefault("part_grids", {})
    key = (exemplar_id, shape_id)
    hit = cache.get(key)
    if hit is not None:
        return hit
    try:
        image = lib.image(exemplar_id)
    except Exception as exc:
        # keep the descriptors so search semantics stay deterministic;
        # cells won by this candidate stay open for the pixel stage
        log.warning("part grid for (%d, %d) has no RGB: %s", exemplar_id, shape_id, exc)
        image = None
    grid = build_part_grid(lib.shape(exemplar_id, shape_id),
                           lib.record(exemplar_id).labels, image=image)
    cache[key] = grid
    return grid


def fill_parts(query_shape: ShapeInstance, query_labels: LabelMap,
               candidate_set: CandidateSet, lib: ExemplarLibrary,
               canvas: Canvas, collect_picks: bool = False) -> FillReport:
    """Fill the query shape's unfilled pixels from matching parts.

    Only cells with at least one unfilled in-mask pixel are searched, and
    only such pixels are written, so earlier stage output is preserved.
    Ties break by candidate rank, then source cell row, then column.
    """
    report = FillReport(stage=STAGE_PART)
    if len(candidate_set) == 0:
        return report
    r0, c0, rows, cols = query_shape.bbox
    open_mask = query_shape.mask & ~canvas.filled[r0 : r0 + rows, c0 : c0 + cols]
    if not open_mask.any():
        return report

    pr, pc = np.nonzero(open_mask)
    # Continuous frame coordinates of each open pixel and its owning cell.
    fy = (pr + 0.5) * FRAME / rows
    fx = (pc + 0.5) * FRAME / cols
    ci = np.minimum((fy / PATCH).astype(np.intp), GRID - 1)
    cj = np.minimum((fx / PATCH).astype(np.intp), GRID - 1)
    cell_ids = np.unique(ci * GRID + cj)
    cells_r = (cell_ids // GRID).astype(np.intp)
    cells_c = (cell_ids % GRID).astype(np.intp)

    q_grid = build_part_grid(query_shape, query_labels)
    q_desc = q_grid.desc[cells_r, cells_c]  # (ncells, DESC_LEN)

    n = len(cell_ids)
    best_score = np.full(n, -1, dtype=np.int64)
    best_rank = np.zeros(n, dtype=np.intp)
    best_ci = np.zeros(n, dtype=np.intp)
    best_cj = np.zeros(n, dtype=np.intp)

    grids = [part_grid_for(lib, cand.exemplar_id, cand.shape_id)
             for cand in candidate_set.candidates]
    for rank, grid in enumerate(grids):
        for di in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1):
            tr = cells_r + di
            for dj in range(-SEARCH_RADIUS, SEARCH_RADIUS + 1):
                tc = cells_c + dj
                valid = (tr >= 0) & (tr < GRID) & (tc >= 0) & (tc < GRID)
                if not valid.any():
                    continue
                scores = np.full(n, -1, dtype=np.int64)
                cand_desc = grid.desc[tr[valid], tc[valid]]
                scores[valid] = (q_desc[valid] == cand_desc).sum(axis=1, dtype=np.int64)
                better = scores > best_score
                if better.any():
                    best_score[better] = scores[better]
                    best_rank[better] = rank
                    best_ci[better] = tr[better]
                    best_cj[better] = tc[better]

    if collect_picks:
        report.picks = [
            (int(cells_r[i]), int(cells_c[i]), int(best_rank[i]),
             int(best_ci[i]), int(best_cj[i]), int(best_score[i]))
            for i in range(n)
        ]

    # Map each open pixel back through its cell's winner: sample the
    # winning candidate frame at the pixel's frame position shifted by
    # the winning cell offset, preserving the sub-cell alignment.
    cell_index = np.searchsorted(cell_ids, ci * GRID + cj)
    win_rank = best_rank[cell_index]
    shift_r = (best_ci[cell_index] - ci) * PATCH
    shift_c = (best_cj[cell_index] - cj) * PATCH
    sample_r = fy + shift_r - 0.5
    sample_c = fx + shift_c - 0.5

    for rank, cand in enumerate(candidate_set.candidates):
        sel = win_rank == rank
        if not sel.any():
            continue
        grid = grids[rank]
        if grid.rgb_frame is None:
            continue
        rgb = bilinear_sample_u8(grid.rgb_frame, sample_r[sel], sample_c[sel])
        cand_shape = lib.shape(cand.exemplar_id, cand.shape_id)
        er0, ec0, e_rows, e_cols = cand_shape.bbox
        donor_r = (np.clip(sample_r[sel], 0, FRAME - 1) + 0.5) * e_rows / FRAME - 0.5 + er0
        donor_c = (np.clip(sample_c[sel], 0, FRAME - 1) + 0.5) * e_cols / FRAME - 0.5 + ec0
        report.pixels_written += canvas.write(
            pr[sel] + r0, pc[sel] + c0, rgb, STAGE_PART, cand.exemplar_id,
            donor_r.astype(np.float32), donor_c.astype(np.float32),
        )
    return report
