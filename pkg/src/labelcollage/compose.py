"""Orchestration of the four matching stages, variant sampling, edits.

A synthesis run retrieves the top-N exemplars, extracts query shapes,
ranks top-k candidate shapes per query shape, paints shapes (stuff
before things, each by descending area), fills missing parts, then
fills residual pixels. Retrieval and candidate ranking are cached per
(query maps, config-minus-seed) digest so reselection and variant
sampling reuse them.
"""

from __future__ import annotations

import hashlib
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import cv2
import numpy as np

from .canvas import Canvas
from .index import ExemplarLibrary
from .parts import fill_parts
from .pixels import fill_pixels
from .raster import (
    InstanceMap,
    LabelMap,
    ShapeInstance,
    UNLABELED,
    bilinear_resize_rgb,
    check_paired,
    extract_shapes,
    nearest_resize,
)
from .retrieval import GlobalMatch, top_n
from .shapes import CandidateSet, retrieve_candidates, transfer_shape_rgb

VALID_STAGES = ("shape", "part", "pixel")

# Cached synthesis contexts kept per library.
_CONTEXT_CACHE_SLOTS = 16


class InvalidEditError(ValueError):
    """Edit parameters out of range or referencing unknown shapes."""


@dataclass(frozen=True)
class SynthesisConfig:
    top_n: int = 100
    top_k: int = 5
    filter_side: int = 50
    seed: int = 0
    stages: tuple[str, ...] = VALID_STAGES
    output_size: tuple[int, int] | None = None  # (width, height)

    def __post_init__(self):
        if self.top_n < 1 or self.top_k < 1 or self.filter_side < 1:
            raise ValueError("top_n, top_k, and filter_side must be >= 1")
        bad = set(self.stages) - set(VALID_STAGES)
        if bad:
            raise ValueError(f"unknown stages: {sorted(bad)}")

    def cache_key_fields(self) -> tuple:
        # Seed picks candidates from cached rankings; it never changes them.
        return (self.top_n, self.top_k, self.filter_side, tuple(self.stages))


def query_digest(labels: LabelMap, instances: InstanceMap, config: SynthesisConfig) -> str:
    h = hashlib.sha256()
    h.update(np.int64(labels.height).tobytes() + np.int64(labels.width).tobytes())
    h.update(labels.data.tobytes())
    h.update(instances.data.tobytes())
    h.update(repr(config.cache_key_fields()).encode())
    return h.hexdigest()[:32]


@dataclass(eq=False)
class SynthesisContext:
    """Everything reusable across variants of one query."""

    digest: str
    labels: LabelMap
    instances: InstanceMap
    config: SynthesisConfig
    top: list[GlobalMatch]
    shapes: list[ShapeInstance]
    candidate_sets: dict[int, CandidateSet]
    paint_order: list[int]
    retrieval_seconds: float
    survivors: int


@dataclass(eq=False)
class Composite:
    """Synthesized output with fill state and per-pixel donor provenance."""

    image: np.ndarray
    filled: np.ndarray
    stage: np.ndarray
    donor_exemplar: np.ndarray
    donor_r: np.ndarray
    donor_c: np.ndarray
    labeled: np.ndarray
    selections: dict[int, int]
    config: SynthesisConfig
    query_digest: str
    stage_stats: dict
    context: SynthesisContext = field(repr=False, default=None)

    def fill_fraction(self) -> float:
        return float(self.filled.mean())


def _paint_order(shapes: list[ShapeInstance]) -> list[int]:
    stuff = [s for s in shapes if s.instance_id == 0]
    things = [s for s in shapes if s.instance_id != 0]
    stuff.sort(key=lambda s: -s.area)
    things.sort(key=lambda s: -s.area)
    return [s.shape_id for s in stuff] + [s.shape_id for s in things]


def prepare_context(query_labels: LabelMap, query_instances: InstanceMap,
                    lib: ExemplarLibrary, config: SynthesisConfig,
                    workers: int = 1) -> SynthesisContext:
    """Retrieve matches and rank candidates, reusing the library cache."""
    check_paired(query_labels, query_instances)
    digest = query_digest(query_labels, query_instances, config)
    cache = lib.stage_caches.setdefault("contexts", {})
    lock = lib.stage_caches.setdefault("contexts_lock", threading.Lock())
    with lock:
        hit = cache.get(digest)
    if hit is not None:
        return hit

    t0 = time.perf_counter()
    matches = top_n(query_labels, query_instances, lib, config.top_n)
    shapes = extract_shapes(query_labels, query_instances)

    def rank_one(shape: ShapeInstance) -> CandidateSet:
        return retrieve_candidates(shape, query_labels, matches, lib,
                                   config.top_k, config.filter_side)

    if workers > 1 and len(shapes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            sets = list(pool.map(rank_one, shapes))
    else:
        sets = [rank_one(s) for s in shapes]

    ctx = SynthesisContext(
        digest=digest,
        labels=query_labels,
        instances=query_instances,
        config=config,
        top=matches,
        shapes=shapes,
        candidate_sets={s.shape_id: cs for s, cs in zip(shapes, sets)},
        paint_order=_paint_order(shapes),
        retrieval_seconds=time.perf_counter() - t0,
        survivors=len(matches),
    )
    with lock:
        cache[digest] = ctx
        while len(cache) > _CONTEXT_CACHE_SLOTS:
            cache.pop(next(iter(cache)))
    return ctx


def _compose(ctx: SynthesisContext, lib: ExemplarLibrary,
             selections: dict[int, int], workers: int = 1) -> Composite:
    config = ctx.config
    h, w = ctx.labels.height, ctx.labels.width
    canvas = Canvas(h, w)
    labeled = ctx.labels.data != UNLABELED
    shapes_by_id = {s.shape_id: s for s in ctx.shapes}
    timings = {"retrieval": ctx.retrieval_seconds}
    written = {}
    filled_after = {}

    t0 = time.perf_counter()
    if "shape" in config.stages:
        count = 0
        for sid in ctx.paint_order:
            cs = ctx.candidate_sets[sid]
            if len(cs) == 0:
                continue
            pick = selections.get(sid, 0)
            count += transfer_shape_rgb(shapes_by_id[sid], cs.candidates[pick],
                                        lib, canvas).pixels_written
        written["shape"] = count
    timings["shape"] = time.perf_counter() - t0
    filled_after["shape"] = int(canvas.filled.sum())

    t0 = time.perf_counter()
    if "part" in config.stages:
        count = 0
        for sid in ctx.paint_order:
            cs = ctx.candidate_sets[sid]
            if len(cs) == 0:
                continue
            count += fill_parts(shapes_by_id[sid], ctx.labels, cs, lib,
                                canvas).pixels_written
        written["part"] = count
    timings["part"] = time.perf_counter() - t0
    filled_after["part"] = int(canvas.filled.sum())

    t0 = time.perf_counter()
    if "pixel" in config.stages:
        written["pixel"] = fill_pixels(ctx.labels, ctx.top, lib, canvas).pixels_written
    timings["pixel"] = time.perf_counter() - t0
    filled_after["pixel"] = int(canvas.filled.sum())

    image = canvas.image
    if config.output_size is not None:
        out_w, out_h = config.output_size
        if (out_h, out_w) != (h, w):
            image = bilinear_resize_rgb(image, out_h, out_w)

    stage_stats = {
        "timings": timings,
        "written": written,
        "filled_after": filled_after,
        "total_pixels": h * w,
        "labeled_pixels": int(labeled.sum()),
        "survivors": ctx.survivors,
        "library_size": len(lib),
    }
    return Composite(
        image=image,
        filled=canvas.filled,
        stage=canvas.stage,
        donor_exemplar=canvas.donor_exemplar,
        donor_r=canvas.donor_r,
        donor_c=canvas.donor_c,
        labeled=labeled,
        selections=dict(selections),
        config=config,
        query_digest=ctx.digest,
        stage_stats=stage_stats,
        context=ctx,
    )


def synthesize(query_labels: LabelMap, query_instances: InstanceMap,
               lib: ExemplarLibrary, config: SynthesisConfig = SynthesisConfig(),
               selections: dict[int, int] | None = None,
               workers: int = 1) -> Composite:
    """Run the full pipeline. Default selection is each shape's rank-1
    candidate; pass selections to override per shape."""
    ctx = prepare_context(query_labels, query_instances, lib, config, workers)
    chosen = dict(selections or {})
    for sid, cs in ctx.candidate_sets.items():
        pick = chosen.get(sid, 0)
        if len(cs) and not 0 <= pick < len(cs):
            raise ValueError(f"selection {pick} out of range for shape {sid}")
    return _compose(ctx, lib, chosen, workers)


def draw_selections(ctx: SynthesisContext, rng: np.random.Generator) -> dict[int, int]:
    """One uniform candidate draw per shape, in shape-id order."""
    picks = {}
    for s in ctx.shapes:
        cs = ctx.candidate_sets[s.shape_id]
        if len(cs):
            picks[s.shape_id] = int(rng.integers(0, len(cs)))
    return picks


def sample_variants(query_labels: LabelMap, query_instances: InstanceMap,
                    lib: ExemplarLibrary, config: SynthesisConfig,
                    count: int, workers: int = 1) -> list[Composite]:
    """Seeded variant sampling; retrieval and candidate sets are shared."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    ctx = prepare_context(query_labels, query_instances, lib, config, workers)
    rng = np.random.default_rng(config.seed)
    out = []
    for _ in range(count):
        out.append(_compose(ctx, lib, draw_selections(ctx, rng), workers))
    return out


def recompose_with_selection(prior: Composite, shape_id: int, candidate_idx: int,
                             lib: ExemplarLibrary) -> Composite:
    """Rebuild the prior composite with one shape's candidate replaced."""
    ctx = prior.context
    if ctx is None:
        raise ValueError("composite carries no synthesis context")
    cs = ctx.candidate_sets.get(shape_id)
    if cs is None:
        raise KeyError(f"unknown shape id {shape_id}")
    if not 0 <= candidate_idx < len(cs):
        raise IndexError(
            f"candidate {candidate_idx} out of range for shape {shape_id} ({len(cs)} available)"
        )
    selections = dict(prior.selections)
    selections[shape_id] = candidate_idx
    return _compose(ctx, lib, selections)


# --- scene edits ------------------------------------------------------------


@dataclass(frozen=True)
class InsertShape:
    source: ShapeInstance
    row0: int
    col0: int
    scale: float = 1.0


@dataclass(frozen=True)
class DeleteShape:
    shape_id: int


@dataclass(frozen=True)
class MoveShape:
    shape_id: int
    row0: int
    col0: int


@dataclass(frozen=True)
class ScaleShape:
    shape_id: int
    factor: float


@dataclass(frozen=True)
class PaintLabel:
    polygon: tuple[tuple[int, int], ...]  # (row, col) vertices
    category: int


SceneEdit = InsertShape | DeleteShape | MoveShape | ScaleShape | PaintLabel


def _placed_mask(source: ShapeInstance, row0: int, col0: int, scale: float,
                 height: int, width: int) -> np.ndarray | None:
    """Source mask scaled and placed at (row0, col0), clipped to bounds."""
    if scale <= 0:
        raise InvalidEditError(f"scale must be positive, got {scale}")
    _, _, rows, cols = source.bbox
    new_rows = max(1, round(rows * scale))
    new_cols = max(1, round(cols * scale))
    mask = nearest_resize(source.mask, new_rows, new_cols)
    r_lo, r_hi = max(0, row0), min(height, row0 + new_rows)
    c_lo, c_hi = max(0, col0), min(width, col0 + new_cols)
    if r_lo >= r_hi or c_lo >= c_hi:
        return None
    placed = np.zeros((height, width), dtype=bool)
    placed[r_lo:r_hi, c_lo:c_hi] = mask[r_lo - row0 : r_hi - row0, c_lo - col0 : c_hi - col0]
    return placed if placed.any() else None


def _polygon_area(polygon) -> float:
    pts = np.asarray(polygon, dtype=np.float64)
    r = pts[:, 0]
    c = pts[:, 1]
    return 0.5 * abs(float(np.dot(c, np.roll(r, -1)) - np.dot(r, np.roll(c, -1))))


def _find_shape(labels: LabelMap, instances: InstanceMap, shape_id: int) -> ShapeInstance:
    for s in extract_shapes(labels, instances):
        if s.shape_id == shape_id:
            return s
    raise InvalidEditError(f"unknown shape id {shape_id}")


def apply_edit(labels: LabelMap, instances: InstanceMap, edit: SceneEdit,
               lib: ExemplarLibrary) -> tuple[LabelMap, InstanceMap]:
    """Apply one scene edit, returning fresh maps.

    Insert overwrites labels under the placed mask with the source
    shape's category and a fresh instance id; delete restores UNLABELED;
    move and scale are delete + insert; paint sets a category (or the
    sentinel, as an eraser) inside a polygon with instance id 0.
    """
    lab = labels.data.copy()
    inst = instances.data.copy()

    def _insert(source: ShapeInstance, row0: int, col0: int, scale: float):
        if source.category >= labels.num_categories:
            raise InvalidEditError(
                f"category {source.category} outside library range {labels.num_categories}"
            )
        placed = _placed_mask(source, row0, col0, scale, labels.height, labels.width)
        if placed is None:
            raise InvalidEditError("inserted shape falls entirely outside the map")
        fresh = int(inst.max()) + 1
        lab[placed] = source.category
        inst[placed] = fresh
        return fresh

    def _delete(shape_id: int) -> ShapeInstance:
        shape = _find_shape(LabelMap(lab, labels.num_categories), InstanceMap(inst), shape_id)
        r0, c0, rows, cols = shape.bbox
        region = (slice(r0, r0 + rows), slice(c0, c0 + cols))
        lab[region][shape.mask] = UNLABELED
        inst[region][shape.mask] = 0
        return shape

    if isinstance(edit, InsertShape):
        _insert(edit.source, edit.row0, edit.col0, edit.scale)
    elif isinstance(edit, DeleteShape):
        _delete(edit.shape_id)
    elif isinstance(edit, MoveShape):
        shape = _delete(edit.shape_id)
        _insert(shape, edit.row0, edit.col0, 1.0)
    elif isinstance(edit, ScaleShape):
        if edit.factor <= 0:
            raise InvalidEditError(f"scale must be positive, got {edit.factor}")
        shape = _delete(edit.shape_id)
        r0, c0, rows, cols = shape.bbox
        new_r0 = round(r0 + rows * (1 - edit.factor) / 2)
        new_c0 = round(c0 + cols * (1 - edit.factor) / 2)
        _insert(shape, new_r0, new_c0, edit.factor)
    elif isinstance(edit, PaintLabel):
        cat = edit.category
        if cat != UNLABELED and cat >= labels.num_categories:
            raise InvalidEditError(f"category {cat} outside library range")
        pts = np.array([(c, r) for r, c in edit.polygon], dtype=np.int32)
        if len(pts) >= 3 and _polygon_area(edit.polygon) > 0:
            region = np.zeros((labels.height, labels.width), dtype=np.uint8)
            cv2.fillPoly(region, [pts], 1)
            sel = region.astype(bool)
            if sel.any():
                lab[sel] = cat
                inst[sel] = 0
    else:
        raise InvalidEditError(f"unknown edit type {type(edit).__name__}")

    return LabelMap(lab, labels.num_categories), InstanceMap(inst)
