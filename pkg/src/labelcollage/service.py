"""HTTP service for interactive synthesis jobs.

Jobs hold a query map pair and its synthesis products. All raster
payloads travel as PNG (16-bit grayscale for maps, 8-bit color for
images) through an opaque image store, so responses are pure views of
engine results. Each job's mutable state is confined behind a lock; the
exemplar library is shared read-only.
"""

from __future__ import annotations

import colorsys
import json
import logging
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile
from pydantic import BaseModel

from . import pngio
from .compose import (
    Composite,
    DeleteShape,
    InsertShape,
    InvalidEditError,
    MoveShape,
    PaintLabel,
    ScaleShape,
    SynthesisConfig,
    apply_edit,
    prepare_context,
    recompose_with_selection,
    sample_variants,
    synthesize,
)
from .index import ExemplarLibrary
from .raster import InstanceMap, LabelMap, RasterError, bilinear_resize_rgb
from .shapes import CandidateSet

log = logging.getLogger(__name__)

_THUMB_SIDE = 96
_PAGE_SIZE = 24


class ImageStore:
    """Opaque ref -> PNG bytes; optionally mirrored to disk."""

    def __init__(self, persist_dir: Path | None = None):
        self._mem: dict[str, bytes] = {}
        self._lock = threading.Lock()
        self._dir = persist_dir
        if persist_dir is not None:
            persist_dir.mkdir(parents=True, exist_ok=True)
            for f in persist_dir.glob("*.png"):
                self._mem[f.stem] = f.read_bytes()

    def put(self, payload: bytes) -> str:
        ref = uuid.uuid4().hex[:16]
        with self._lock:
            self._mem[ref] = payload
        if self._dir is not None:
            (self._dir / f"{ref}.png").write_bytes(payload)
        return ref

    def get(self, ref: str) -> bytes:
        with self._lock:
            payload = self._mem.get(ref)
        if payload is None:
            raise KeyError(ref)
        return payload


@dataclass(eq=False)
class Job:
    job_id: str
    labels: LabelMap
    instances: InstanceMap
    config: SynthesisConfig
    status: str = "pending"
    error: str | None = None
    base: Composite | None = None
    base_image_ref: str | None = None
    base_provenance_ref: str | None = None
    variants: dict[str, dict] = field(default_factory=dict)
    variant_lists: dict[tuple, list[str]] = field(default_factory=dict)
    mask_refs: dict[int, str] = field(default_factory=dict)
    labels_ref: str | None = None
    instances_ref: str | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)


class SelectBody(BaseModel):
    shape_id: int
    candidate_idx: int
    variant_id: str | None = None


class EditBody(BaseModel):
    op: str
    shape_id: int | None = None
    exemplar_id: int | None = None
    query_shape_id: int | None = None
    row: int | None = None
    col: int | None = None
    scale: float | None = None
    factor: float | None = None
    polygon: list[list[int]] | None = None
    category: int | None = None


def _provenance_png(comp: Composite) -> bytes:
    # exemplar id + 1 so 0 means "no donor"; stage codes ride along in a
    # second plane by stacking vertically would break shape, so stage is
    # served separately.
    return pngio.encode_gray16((comp.donor_exemplar.astype(np.int64) + 1).astype(np.uint16))


def _stage_png(comp: Composite) -> bytes:
    return pngio.encode_gray16(comp.stage.astype(np.uint16))


def _category_colors(n: int) -> list[list[int]]:
    rng = np.random.default_rng(7)
    hues = (np.arange(n) * 0.61803398875) % 1.0
    colors = []
    for h in hues:
        r, g, b = colorsys.hsv_to_rgb(float(h), 0.55 + 0.3 * float(rng.uniform()), 0.9)
        colors.append([int(255 * r), int(255 * g), int(255 * b)])
    return colors


def create_app(lib: ExemplarLibrary, persist_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="labelcollage", version="0.1.0")
    persist = Path(persist_dir) if persist_dir else None
    store = ImageStore(persist / "images" if persist else None)
    jobs: dict[str, Job] = {}
    jobs_lock = threading.Lock()
    executor = ThreadPoolExecutor(max_workers=2)
    thumb_cache: dict[tuple[int, int], str] = {}
    colors = _category_colors(lib.num_categories)

    def _persist_job(job: Job) -> None:
        if persist is None:
            return
        jdir = persist / "jobs" / job.job_id
        jdir.mkdir(parents=True, exist_ok=True)
        pngio.write_gray16(jdir / "labels.png", job.labels.data)
        pngio.write_gray16(jdir / "instances.png", job.instances.data)
        (jdir / "meta.json").write_text(json.dumps({
            "config": {
                "top_n": job.config.top_n,
                "top_k": job.config.top_k,
                "filter_side": job.config.filter_side,
                "seed": job.config.seed,
                "stages": list(job.config.stages),
            },
        }))

    def _load_persisted() -> None:
        if persist is None or not (persist / "jobs").is_dir():
            return
        for jdir in sorted((persist / "jobs").iterdir()):
            try:
                meta = json.loads((jdir / "meta.json").read_text())
                cfg = meta["config"]
                job = Job(
                    job_id=jdir.name,
                    labels=LabelMap(pngio.read_gray16(jdir / "labels.png"), lib.num_categories),
                    instances=InstanceMap(pngio.read_gray16(jdir / "instances.png")),
                    config=SynthesisConfig(top_n=cfg["top_n"], top_k=cfg["top_k"],
                                           filter_side=cfg["filter_side"], seed=cfg["seed"],
                                           stages=tuple(cfg["stages"])),
                )
                job.labels_ref = store.put(pngio.encode_gray16(job.labels.data))
                job.instances_ref = store.put(pngio.encode_gray16(job.instances.data))
                jobs[job.job_id] = job
                executor.submit(_run_base, job)
            except Exception as exc:
                log.warning("could not reload job %s: %s", jdir.name, exc)

    def _run_base(job: Job) -> None:
        with job.lock:
            if job.status == "running":
                return
            job.status = "running"
        try:
            comp = synthesize(job.labels, job.instances, lib, job.config)
            with job.lock:
                job.base = comp
                job.base_image_ref = store.put(pngio.encode_rgb(comp.image))
                job.base_provenance_ref = store.put(_provenance_png(comp))
                job.status = "done"
        except Exception as exc:  # surfaced via the status endpoint
            log.exception("synthesis failed for job %s", job.job_id)
            with job.lock:
                job.status = "failed"
                job.error = str(exc)

    def _get_job(job_id: str) -> Job:
        with jobs_lock:
            job = jobs.get(job_id)
        if job is None:
            raise HTTPException(404, f"unknown job {job_id}")
        return job

    def _ensure_base(job: Job) -> Composite:
        if job.base is None:
            _run_base(job)
        if job.base is None:
            raise HTTPException(409, f"synthesis not available: {job.error}")
        return job.base

    def _shape_payload(job: Job) -> list[dict]:
        ctx = prepare_context(job.labels, job.instances, lib, job.config)
        out = []
        for s in ctx.shapes:
            mask_ref = job.mask_refs.get(s.shape_id)
            if mask_ref is None:
                payload = pngio.encode_gray16(s.mask.astype(np.uint16) * 0xFFFF)
                mask_ref = store.put(payload)
                job.mask_refs[s.shape_id] = mask_ref
            out.append({
                "shape_id": s.shape_id,
                "category": s.category,
                "category_name": lib.category_names[s.category],
                "instance_id": s.instance_id,
                "bbox": list(s.bbox),
                "area": s.area,
                "mask_ref": mask_ref,
                "candidate_count": len(ctx.candidate_sets[s.shape_id]),
            })
        return out

    def _thumbnail(exemplar_id: int, shape_id: int) -> str:
        key = (exemplar_id, shape_id)
        ref = thumb_cache.get(key)
        if ref is not None:
            return ref
        shape = lib.shape(exemplar_id, shape_id)
        image = lib.image(exemplar_id)
        r0, c0, rows, cols = shape.bbox
        crop = image[r0 : r0 + rows, c0 : c0 + cols].copy()
        crop[~shape.mask] //= 3  # dim context outside the shape
        scale = _THUMB_SIDE / max(rows, cols)
        th = max(1, round(rows * scale))
        tw = max(1, round(cols * scale))
        ref = store.put(pngio.encode_rgb(bilinear_resize_rgb(crop, th, tw)))
        thumb_cache[key] = ref
        return ref

    def _variant_entry(job: Job, comp: Composite, variant_id: str) -> dict:
        entry = {
            "variant_id": variant_id,
            "image_ref": store.put(pngio.encode_rgb(comp.image)),
            "provenance_ref": store.put(_provenance_png(comp)),
            "stage_ref": store.put(_stage_png(comp)),
            "selections": {str(k): v for k, v in comp.selections.items()},
        }
        job.variants[variant_id] = {**entry, "composite": comp}
        return entry

    @app.get("/library")
    def library_info():
        return {
            "num_exemplars": len(lib),
            "num_categories": lib.num_categories,
            "category_names": lib.category_names,
            "colors": colors,
        }

    @app.get("/library/shapes")
    def library_shapes(category: int, page: int = 0):
        if not 0 <= category < lib.num_categories:
            raise HTTPException(422, f"category {category} out of range")
        entries = lib.shape_catalog.get(category, [])
        start = page * _PAGE_SIZE
        chunk = entries[start : start + _PAGE_SIZE]
        return {
            "category": category,
            "page": page,
            "total": len(entries),
            "shapes": [
                {
                    "exemplar_id": ex,
                    "shape_id": sid,
                    "bbox": list(lib.shape(ex, sid).bbox),
                    "area": lib.shape(ex, sid).area,
                    "thumbnail_ref": _thumbnail(ex, sid),
                }
                for ex, sid in chunk
            ],
        }

    @app.post("/jobs", status_code=201)
    async def create_job(labels: UploadFile = File(...), instances: UploadFile = File(...),
                         config: str = Form("{}")):
        try:
            cfg_raw = json.loads(config)
            cfg = SynthesisConfig(
                top_n=cfg_raw.get("top_n", 100),
                top_k=cfg_raw.get("top_k", 5),
                filter_side=cfg_raw.get("filter_side", 50),
                seed=cfg_raw.get("seed", 0),
                stages=tuple(cfg_raw.get("stages", ["shape", "part", "pixel"])),
            )
            lab = LabelMap(pngio.decode_gray16(await labels.read()), lib.num_categories)
            inst = InstanceMap(pngio.decode_gray16(await instances.read()))
            if lab.data.shape != inst.data.shape:
                raise RasterError("label and instance maps differ in size")
        except (ValueError, RasterError, pngio.PngError) as exc:
            raise HTTPException(422, str(exc))
        job = Job(job_id=uuid.uuid4().hex[:12], labels=lab, instances=inst, config=cfg)
        job.labels_ref = store.put(pngio.encode_gray16(lab.data))
        job.instances_ref = store.put(pngio.encode_gray16(inst.data))
        with jobs_lock:
            jobs[job.job_id] = job
        _persist_job(job)
        executor.submit(_run_base, job)
        return {"job_id": job.job_id}

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        job = _get_job(job_id)
        with job.lock:
            return {
                "job_id": job.job_id,
                "status": job.status,
                "error": job.error,
                "width": job.labels.width,
                "height": job.labels.height,
                "labels_ref": job.labels_ref,
                "instances_ref": job.instances_ref,
                "base_image_ref": job.base_image_ref,
                "base_provenance_ref": job.base_provenance_ref,
            }

    @app.get("/jobs/{job_id}/shapes")
    def job_shapes(job_id: str):
        job = _get_job(job_id)
        with job.lock:
            return {"shapes": _shape_payload(job)}

    @app.get("/jobs/{job_id}/shapes/{shape_id}/candidates")
    def shape_candidates(job_id: str, shape_id: int):
        job = _get_job(job_id)
        with job.lock:
            ctx = prepare_context(job.labels, job.instances, lib, job.config)
            cs: CandidateSet | None = ctx.candidate_sets.get(shape_id)
            if cs is None:
                raise HTTPException(404, f"unknown shape {shape_id}")
            return {
                "shape_id": shape_id,
                "candidates": [
                    {
                        "rank": i,
                        "exemplar_id": c.exemplar_id,
                        "shape_id": c.shape_id,
                        "score": c.score,
                        "thumbnail_ref": _thumbnail(c.exemplar_id, c.shape_id),
                    }
                    for i, c in enumerate(cs.candidates)
                ],
            }

    @app.get("/jobs/{job_id}/variants")
    def job_variants(job_id: str, count: int = 4, seed: int | None = None):
        if count < 1:
            raise HTTPException(422, "count must be >= 1")
        job = _get_job(job_id)
        with job.lock:
            use_seed = job.config.seed if seed is None else seed
            key = (count, use_seed)
            if key not in job.variant_lists:
                cfg = SynthesisConfig(top_n=job.config.top_n, top_k=job.config.top_k,
                                      filter_side=job.config.filter_side, seed=use_seed,
                                      stages=job.config.stages)
                comps = sample_variants(job.labels, job.instances, lib, cfg, count)
                ids = []
                for i, comp in enumerate(comps):
                    vid = f"s{use_seed}n{count}i{i}"
                    if vid not in job.variants:
                        _variant_entry(job, comp, vid)
                    ids.append(vid)
                job.variant_lists[key] = ids
            entries = [
                {k: v for k, v in job.variants[vid].items() if k != "composite"}
                for vid in job.variant_lists[key]
            ]
            return {"variants": entries, "seed": use_seed}

    @app.post("/jobs/{job_id}/select")
    def select_candidate(job_id: str, body: SelectBody):
        job = _get_job(job_id)
        with job.lock:
            if body.variant_id is not None:
                entry = job.variants.get(body.variant_id)
                if entry is None:
                    raise HTTPException(404, f"unknown variant {body.variant_id}")
                base = entry["composite"]
            else:
                base = _ensure_base(job)
            try:
                comp = recompose_with_selection(base, body.shape_id, body.candidate_idx, lib)
            except KeyError as exc:
                raise HTTPException(404, str(exc))
            except IndexError as exc:
                raise HTTPException(422, str(exc))
            vid = f"sel{uuid.uuid4().hex[:8]}"
            return _variant_entry(job, comp, vid)

    @app.post("/jobs/{job_id}/edits")
    def apply_scene_edit(job_id: str, body: EditBody):
        job = _get_job(job_id)
        with job.lock:
            try:
                edit = _parse_edit(body, job, lib)
                new_labels, new_instances = apply_edit(job.labels, job.instances, edit, lib)
            except (InvalidEditError, RasterError, KeyError, ValueError) as exc:
                raise HTTPException(422, str(exc))
            inserted = None
            if isinstance(edit, (InsertShape, MoveShape, ScaleShape)):
                inserted = int(new_instances.data.max())
            job.labels = new_labels
            job.instances = new_instances
            job.labels_ref = store.put(pngio.encode_gray16(new_labels.data))
            job.instances_ref = store.put(pngio.encode_gray16(new_instances.data))
            job.base = None
            job.base_image_ref = None
            job.base_provenance_ref = None
            job.variants.clear()
            job.variant_lists.clear()
            job.mask_refs.clear()
            job.status = "pending"
        _persist_job(job)
        executor.submit(_run_base, job)
        with job.lock:
            return {
                "invalidated": True,
                "labels_ref": job.labels_ref,
                "instances_ref": job.instances_ref,
                "inserted_instance_id": inserted,
                "shapes": _shape_payload(job),
            }

    @app.get("/images/{ref}")
    def get_image(ref: str):
        try:
            return Response(content=store.get(ref), media_type="image/png")
        except KeyError:
            raise HTTPException(404, f"unknown image {ref}")

    _load_persisted()
    return app


def _parse_edit(body: EditBody, job: Job, lib: ExemplarLibrary):
    from .raster import extract_shapes

    if body.op == "insert":
        if body.exemplar_id is not None:
            if body.shape_id is None:
                raise InvalidEditError("insert from library needs exemplar_id and shape_id")
            source = lib.shape(body.exemplar_id, body.shape_id)
        elif body.query_shape_id is not None:
            match = [s for s in extract_shapes(job.labels, job.instances)
                     if s.shape_id == body.query_shape_id]
            if not match:
                raise InvalidEditError(f"unknown query shape {body.query_shape_id}")
            source = match[0]
        else:
            raise InvalidEditError("insert needs a source shape")
        if body.row is None or body.col is None:
            raise InvalidEditError("insert needs row and col")
        return InsertShape(source=source, row0=body.row, col0=body.col,
                           scale=body.scale if body.scale is not None else 1.0)
    if body.op == "delete":
        if body.shape_id is None:
            raise InvalidEditError("delete needs shape_id")
        return DeleteShape(shape_id=body.shape_id)
    if body.op == "move":
        if body.shape_id is None or body.row is None or body.col is None:
            raise InvalidEditError("move needs shape_id, row, col")
        return MoveShape(shape_id=body.shape_id, row0=body.row, col0=body.col)
    if body.op == "scale":
        if body.shape_id is None or body.factor is None:
            raise InvalidEditError("scale needs shape_id and factor")
        return ScaleShape(shape_id=body.shape_id, factor=body.factor)
    if body.op == "paint":
        if not body.polygon or body.category is None:
            raise InvalidEditError("paint needs polygon and category")
        return PaintLabel(polygon=tuple((int(r), int(c)) for r, c in body.polygon),
                          category=body.category)
    raise InvalidEditError(f"unknown edit op {body.op!r}")
