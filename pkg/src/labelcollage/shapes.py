"""Stage 2: shape descriptors, scoring, candidate retrieval, RGB transfer.

Each shape is summarized on a fixed square filter (default 50x50) by a
mask operator m (+1 inside the resized shape mask, -1 outside) and a
contextual operator v (the label map crop resized to the filter). Two
shapes score

    S = sum_t m_i[t] * m_j[t] + [v_i[t] == v_j[t]]

an exact integer in [-side^2, 2*side^2]. Candidates come from the same
semantic category across the top-N exemplars, gated by aspect ratio, and
the winner's RGB is transferred under the intersection of both masks.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass

import numpy as np

from .canvas import Canvas, FillReport, STAGE_SHAPE
from .index import ExemplarLibrary
from .raster import LabelMap, ShapeInstance, bilinear_sample_u8, nearest_resize

log = logging.getLogger(__name__)

DEFAULT_FILTER_SIDE = 50
# Candidates whose aspect quotient (query/candidate) falls outside
# [0.5, 2] are dropped before scoring.
ASPECT_MIN = 0.5
ASPECT_MAX = 2.0


@dataclass(frozen=True, eq=False)
class ShapeDescriptor:
    side: int
    m: np.ndarray       # int8 (side, side), values in {-1, +1}
    v: np.ndarray       # uint16 (side, side), category ids incl. sentinels
    aspect: float


@dataclass(frozen=True)
class Candidate:
    exemplar_id: int
    shape_id: int
    score: int


@dataclass(frozen=True, eq=False)
class CandidateSet:
    query_shape_id: int
    candidates: tuple[Candidate, ...]

    def __len__(self) -> int:
        return len(self.candidates)


def build_descriptor(shape: ShapeInstance, labels: LabelMap,
                     side: int = DEFAULT_FILTER_SIDE) -> ShapeDescriptor:
    """Mask + context operators for one shape on a side x side filter."""
    r0, c0, rows, cols = shape.bbox
    if r0 < 0 or c0 < 0 or r0 + rows > labels.height or c0 + cols > labels.width:
        raise ValueError(f"shape bbox {shape.bbox} outside label map {labels.data.shape}")
    crop = labels.data[r0 : r0 + rows, c0 : c0 + cols]
    v = nearest_resize(crop, side, side).astype(np.uint16)
    mask_small = nearest_resize(shape.mask, side, side)
    m = np.where(mask_small, 1, -1).astype(np.int8)
    return ShapeDescriptor(side=side, m=m, v=v, aspect=cols / rows)


def score_shape(d_q: ShapeDescriptor, d_e: ShapeDescriptor) -> int:
    if d_q.side != d_e.side:
        raise ValueError(f"descriptor side mismatch: {d_q.side} vs {d_e.side}")
    mask_term = int((d_q.m.astype(np.int32) * d_e.m).sum())
    context_term = int((d_q.v == d_e.v).sum())
    return mask_term + context_term


def _descriptor_cache(lib: ExemplarLibrary) -> dict:
    return lib.stage_caches.setdefault("shape_descriptors", {})


def descriptor_for(lib: ExemplarLibrary, exemplar_id: int, shape_id: int,
                   side: int = DEFAULT_FILTER_SIDE) -> ShapeDescriptor:
    cache = _descriptor_cache(lib)
    key = (exemplar_id, shape_id, side)
    hit = cache.get(key)
    if hit is not None:
        return hit
    d = build_descriptor(lib.shape(exemplar_id, shape_id), lib.record(exemplar_id).labels, side)
    cache[key] = d
    return d


def _category_stack(lib: ExemplarLibrary, category: int, side: int):
    """Stacked descriptors for every library shape of one category.

    Returns (exemplar_ids, shape_ids, aspects, M, V) with M (P, side^2)
    int8 and V (P, side^2) uint16, rows ordered by (exemplar, shape) id.
    Built lazily once per library and reused by every query.
    """
    stacks = lib.stage_caches.setdefault("shape_stacks", {})
    lock = lib.stage_caches.setdefault("shape_stacks_lock", threading.Lock())
    key = (category, side)
    with lock:
        hit = stacks.get(key)
    if hit is not None:
        return hit
    entries = lib.shape_catalog.get(category, [])
    if not entries:
        value = (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64),
                 np.empty((0, side * side), np.int8), np.empty((0, side * side), np.uint16))
    else:
        descs = [descriptor_for(lib, ex, sid, side) for ex, sid in entries]
        value = (
            np.array([ex for ex, _ in entries], dtype=np.int64),
            np.array([sid for _, sid in entries], dtype=np.int64),
            np.array([d.aspect for d in descs], dtype=np.float64),
            np.stack([d.m.ravel() for d in descs]),
            np.stack([d.v.ravel() for d in descs]),
        )
    with lock:
        stacks[key] = value
    return value


def retrieve_candidates(query_shape: ShapeInstance, query_labels: LabelMap,
                        top_exemplars, lib: ExemplarLibrary, k: int,
                        side: int = DEFAULT_FILTER_SIDE) -> CandidateSet:
    """Top-k same-category shapes from the top-N exemplars.

    Aspect gate first, then exact integer scoring; ranking is by score
    descending with ties broken by (exemplar_id, shape_id) ascending. An
    empty pool yields an empty set; the compositor then leaves the shape
    to the part/pixel stages.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    top_ids = {m.exemplar_id if hasattr(m, "exemplar_id") else int(m) for m in top_exemplars}
    ex_ids, sh_ids, aspects, m_stack, v_stack = _category_stack(lib, query_shape.category, side)
    if len(ex_ids) == 0:
        return CandidateSet(query_shape.shape_id, ())

    d_q = build_descriptor(query_shape, query_labels, side)
    in_top = np.isin(ex_ids, np.fromiter(top_ids, dtype=np.int64, count=len(top_ids)))
    quotient = d_q.aspect / aspects
    keep = in_top & (quotient >= ASPECT_MIN) & (quotient <= ASPECT_MAX)
    if not keep.any():
        return CandidateSet(query_shape.shape_id, ())

    idx = np.flatnonzero(keep)
    mask_term = (m_stack[idx].astype(np.int32) * d_q.m.ravel()).sum(axis=1, dtype=np.int64)
    context_term = (v_stack[idx] == d_q.v.ravel()).sum(axis=1, dtype=np.int64)
    scores = mask_term + context_term
    order = np.lexsort((sh_ids[idx], ex_ids[idx], -scores))[:k]
    return CandidateSet(
        query_shape.shape_id,
        tuple(Candidate(int(ex_ids[idx[i]]), int(sh_ids[idx[i]]), int(scores[i])) for i in order),
    )


def transfer_shape_rgb(query_shape: ShapeInstance, candidate: Candidate,
                       lib: ExemplarLibrary, canvas: Canvas) -> FillReport:
    """Paint the candidate's RGB into the query shape's bbox.

    The candidate crop is resized to the query bbox (bilinear RGB,
    nearest mask); only pixels active in both masks and still unfilled
    are written. Donor coordinates record the exact source position in
    the exemplar's full-resolution frame.
    """
    report = FillReport(stage=STAGE_SHAPE)
    cand_shape = lib.shape(candidate.exemplar_id, candidate.shape_id)
    try:
        image = lib.image(candidate.exemplar_id)
    except Exception as exc:  # unreadable image: skip, stage 3/4 recover
        log.warning("skipping candidate (%d, %d): %s",
                    candidate.exemplar_id, candidate.shape_id, exc)
        report.skipped.append(f"exemplar {candidate.exemplar_id}: {exc}")
        return report

    qr0, qc0, q_rows, q_cols = query_shape.bbox
    cr0, cc0, c_rows, c_cols = cand_shape.bbox
    crop = image[cr0 : cr0 + c_rows, cc0 : cc0 + c_cols]

    cand_mask = nearest_resize(cand_shape.mask, q_rows, q_cols)
    write_mask = query_shape.mask & cand_mask & ~canvas.filled[qr0 : qr0 + q_rows, qc0 : qc0 + q_cols]
    if not write_mask.any():
        return report

    rr, cc = np.nonzero(write_mask)
    # Continuous source position of each written pixel inside the
    # candidate crop, then offset into the exemplar frame.
    src_r = (rr + 0.5) * c_rows / q_rows - 0.5
    src_c = (cc + 0.5) * c_cols / q_cols - 0.5
    rgb = bilinear_sample_u8(crop, src_r, src_c)
    report.pixels_written = canvas.write(
        rr + qr0, cc + qc0, rgb, STAGE_SHAPE, candidate.exemplar_id,
        (src_r + cr0).astype(np.float32), (src_c + cc0).astype(np.float32),
    )
    return report
