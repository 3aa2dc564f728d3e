"""Exemplar library: dataset ingestion, precomputed metadata, persistence.

A dataset is a directory of (image, label map, instance map) PNG triplets
plus a categories.txt. Ingestion precomputes everything the matching
stages read per exemplar: indicator vector, normalized histogram, 100x100
and 128x128 low-res label maps, and the shape inventory. The index file
("CSIX" container, see docs/index-format.md) stores all of that; RGB
images stay on disk and are read lazily.
"""

from __future__ import annotations

import logging
import struct
import threading
import zlib
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import pngio
from .raster import (
    LabelMap,
    InstanceMap,
    ShapeInstance,
    RasterError,
    extract_shapes,
    indicator_vector,
    label_histogram,
    label_map_trusted,
    resize_labels,
    shape_trusted,
)

log = logging.getLogger(__name__)

MAGIC = b"CSIX"
FORMAT_VERSION = 1

# Cached full-resolution exemplar images kept in memory at once.
_IMAGE_CACHE_SLOTS = 256


class DatasetError(Exception):
    """Dataset directory unusable (missing layout, zero valid triplets)."""


class IndexFormatError(Exception):
    """Index file rejected: bad magic, version, or truncation."""


@dataclass(eq=False)
class ExemplarRecord:
    """One ingested triplet with every derived field the stages need."""

    exemplar_id: int
    image_ref: str
    labels: LabelMap
    indicator: np.ndarray
    histogram: np.ndarray
    lowres100: LabelMap
    lowres128: LabelMap
    shapes: list[ShapeInstance] = field(default_factory=list)


def build_record(exemplar_id: int, image_ref: str, labels: LabelMap,
                 instances: InstanceMap) -> ExemplarRecord:
    shapes = [
        ShapeInstance(
            shape_id=s.shape_id,
            category=s.category,
            instance_id=s.instance_id,
            bbox=s.bbox,
            mask=s.mask,
            area=s.area,
            exemplar_id=exemplar_id,
        )
        for s in extract_shapes(labels, instances)
    ]
    return ExemplarRecord(
        exemplar_id=exemplar_id,
        image_ref=image_ref,
        labels=labels,
        indicator=indicator_vector(labels),
        histogram=label_histogram(labels),
        lowres100=resize_labels(labels, 100, 100),
        lowres128=resize_labels(labels, 128, 128),
        shapes=shapes,
    )


class ExemplarLibrary:
    """Immutable, share-anywhere collection of exemplar records.

    Derived lookup structures (shape catalog, stacked indicator /
    low-res matrices) are built once; descriptor and image caches are
    lock-guarded so concurrent synthesis jobs can share one library.
    """

    def __init__(self, data_root: str | Path, records: list[ExemplarRecord],
                 num_categories: int, category_names: list[str]):
        if not records:
            raise DatasetError("library must contain at least one exemplar")
        self.data_root = Path(data_root)
        self.records = sorted(records, key=lambda r: r.exemplar_id)
        self.num_categories = num_categories
        self.category_names = list(category_names)
        ids = [r.exemplar_id for r in self.records]
        if ids != list(range(len(ids))):
            raise DatasetError(f"exemplar ids must be dense starting at 0, got {ids[:5]}...")

        self.shape_catalog: dict[int, list[tuple[int, int]]] = {}
        for rec in self.records:
            for s in rec.shapes:
                self.shape_catalog.setdefault(s.category, []).append((rec.exemplar_id, s.shape_id))
        for entries in self.shape_catalog.values():
            entries.sort()

        self.indicator_matrix = np.stack([r.indicator for r in self.records])
        self.histogram_matrix = np.stack([r.histogram for r in self.records])
        self._lock = threading.Lock()
        self._image_cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self._lowres100_stack: np.ndarray | None = None
        self._lowres128_pad: dict[int, np.ndarray] = {}
        # Per-library caches owned by the matching stages; see shapes.py
        # and parts.py.
        self.stage_caches: dict[str, dict] = {}

    def __len__(self) -> int:
        return len(self.records)

    def record(self, exemplar_id: int) -> ExemplarRecord:
        if not 0 <= exemplar_id < len(self.records):
            raise KeyError(f"unknown exemplar id {exemplar_id}")
        return self.records[exemplar_id]

    def shape(self, exemplar_id: int, shape_id: int) -> ShapeInstance:
        rec = self.record(exemplar_id)
        if not 0 <= shape_id < len(rec.shapes):
            raise KeyError(f"exemplar {exemplar_id} has no shape {shape_id}")
        return rec.shapes[shape_id]

    def image_path(self, exemplar_id: int) -> Path:
        return self.data_root / self.record(exemplar_id).image_ref

    def image(self, exemplar_id: int) -> np.ndarray:
        """Full-resolution RGB pixels for an exemplar (LRU-cached)."""
        with self._lock:
            if exemplar_id in self._image_cache:
                self._image_cache.move_to_end(exemplar_id)
                return self._image_cache[exemplar_id]
        img = pngio.read_rgb(self.image_path(exemplar_id))
        img.setflags(write=False)
        with self._lock:
            self._image_cache[exemplar_id] = img
            while len(self._image_cache) > _IMAGE_CACHE_SLOTS:
                self._image_cache.popitem(last=False)
        return img

    def lowres100_stack(self) -> np.ndarray:
        with self._lock:
            if self._lowres100_stack is None:
                self._lowres100_stack = np.stack([r.lowres100.data for r in self.records])
            return self._lowres100_stack


def _read_triplet(root: Path, stem: str, num_categories: int):
    labels_arr = pngio.read_gray16(root / "labels" / f"{stem}.png")
    inst_arr = pngio.read_gray16(root / "instances" / f"{stem}.png")
    image_path = root / "images" / f"{stem}.png"
    if not image_path.exists():
        raise DatasetError(f"missing image for {stem}")
    labels = LabelMap(labels_arr, num_categories)
    instances = InstanceMap(inst_arr)
    if labels.data.shape != instances.data.shape:
        raise RasterError(f"{stem}: label/instance size mismatch")
    return labels, instances


def ingest(dataset_root: str | Path, workers: int = 4) -> ExemplarLibrary:
    """Build a library from a dataset directory.

    Triplets are processed in filename order; broken ones are skipped
    with a warning. Zero usable triplets is fatal.
    """
    root = Path(dataset_root)
    cat_file = root / "categories.txt"
    if not cat_file.exists():
        raise DatasetError(f"{root}: missing categories.txt")
    category_names = [line.strip() for line in cat_file.read_text().splitlines() if line.strip()]
    if not category_names:
        raise DatasetError(f"{root}: categories.txt is empty")
    num_categories = len(category_names)

    labels_dir = root / "labels"
    if not labels_dir.is_dir():
        raise DatasetError(f"{root}: missing labels/ directory")
    stems = sorted(p.stem for p in labels_dir.glob("*.png"))
    if not stems:
        raise DatasetError(f"{root}: no label maps found")

    def build_one(stem: str) -> ExemplarRecord | None:
        try:
            labels, instances = _read_triplet(root, stem, num_categories)
            # exemplar_id assigned after the parallel phase, by sorted stem.
            return build_record(0, f"images/{stem}.png", labels, instances)
        except (DatasetError, RasterError, pngio.PngError) as exc:
            log.warning("skipping %s: %s", stem, exc)
            return None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            built = list(pool.map(build_one, stems))
    else:
        built = [build_one(stem) for stem in stems]

    records = []
    for rec in built:
        if rec is None:
            continue
        rec.exemplar_id = len(records)
        for s in rec.shapes:
            object.__setattr__(s, "exemplar_id", rec.exemplar_id)
        records.append(rec)
    if not records:
        raise DatasetError(f"{root}: no usable triplets")
    return ExemplarLibrary(root, records, num_categories, category_names)


# --- binary container ------------------------------------------------------
# Byte layout documented in docs/index-format.md. Everything little-endian.


def _pack_array_z(arr: np.ndarray) -> bytes:
    payload = zlib.compress(np.ascontiguousarray(arr).astype("<u2").tobytes(), 6)
    return struct.pack("<I", len(payload)) + payload


def _pack_record(rec: ExemplarRecord, num_categories: int) -> bytes:
    parts = [struct.pack("<I", rec.exemplar_id)]
    ref = rec.image_ref.encode("utf-8")
    parts.append(struct.pack("<H", len(ref)) + ref)
    parts.append(struct.pack("<II", rec.labels.height, rec.labels.width))
    parts.append(_pack_array_z(rec.labels.data))
    ind_bytes = np.packbits(rec.indicator).tobytes()
    parts.append(struct.pack("<I", len(ind_bytes)) + ind_bytes)
    parts.append(rec.histogram.astype("<f8").tobytes())
    parts.append(_pack_array_z(rec.lowres100.data))
    parts.append(_pack_array_z(rec.lowres128.data))
    parts.append(struct.pack("<I", len(rec.shapes)))
    for s in rec.shapes:
        r0, c0, rows, cols = s.bbox
        parts.append(struct.pack("<IHIIIIII", s.shape_id, s.category, s.instance_id,
                                 r0, c0, rows, cols, s.area))
        mask_z = zlib.compress(np.packbits(s.mask).tobytes(), 6)
        parts.append(struct.pack("<I", len(mask_z)) + mask_z)
    return b"".join(parts)


class _Reader:
    def __init__(self, payload: bytes):
        self.buf = payload
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise IndexFormatError("index file truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _read_array_z(r: _Reader, shape: tuple[int, ...]) -> np.ndarray:
    (zlen,) = r.unpack("<I")
    raw = zlib.decompress(r.take(zlen))
    arr = np.frombuffer(raw, dtype="<u2").astype(np.uint16)
    return arr.reshape(shape)


def _unpack_record(r: _Reader, num_categories: int) -> ExemplarRecord:
    # values were validated at ingest time; wrap without re-scanning
    (exemplar_id,) = r.unpack("<I")
    (ref_len,) = r.unpack("<H")
    image_ref = r.take(ref_len).decode("utf-8")
    height, width = r.unpack("<II")
    labels = label_map_trusted(_read_array_z(r, (height, width)), num_categories)
    (ind_len,) = r.unpack("<I")
    indicator = np.unpackbits(np.frombuffer(r.take(ind_len), dtype=np.uint8))[:num_categories].astype(bool)
    histogram = np.frombuffer(r.take(8 * num_categories), dtype="<f8").astype(np.float64)
    lowres100 = label_map_trusted(_read_array_z(r, (100, 100)), num_categories)
    lowres128 = label_map_trusted(_read_array_z(r, (128, 128)), num_categories)
    (num_shapes,) = r.unpack("<I")
    shapes = []
    for _ in range(num_shapes):
        shape_id, category, instance_id, r0, c0, rows, cols, area = r.unpack("<IHIIIIII")
        (mask_zlen,) = r.unpack("<I")
        bits = np.unpackbits(np.frombuffer(zlib.decompress(r.take(mask_zlen)), dtype=np.uint8))
        mask = np.ascontiguousarray(bits[: rows * cols].reshape(rows, cols).astype(bool))
        shapes.append(shape_trusted(shape_id, category, instance_id,
                                    (r0, c0, rows, cols), mask, area, exemplar_id))
    return ExemplarRecord(exemplar_id, image_ref, labels, indicator, histogram,
                          lowres100, lowres128, shapes)


def save_index(lib: ExemplarLibrary, path: str | Path) -> None:
    """Write the library (minus image pixels) to a CSIX container."""
    import json

    header = json.dumps({
        "num_categories": lib.num_categories,
        "category_names": lib.category_names,
        "data_root": str(lib.data_root),
    }).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(struct.pack("<I", len(lib.records)))
        for rec in lib.records:
            blob = _pack_record(rec, lib.num_categories)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)


def load_index(path: str | Path, data_root: str | Path | None = None) -> ExemplarLibrary:
    """Load a CSIX container; data_root overrides the stored dataset path."""
    import json

    try:
        payload = Path(path).read_bytes()
    except OSError as exc:
        raise IndexFormatError(f"cannot read index: {exc}") from exc
    r = _Reader(payload)
    if r.take(4) != MAGIC:
        raise IndexFormatError(f"{path}: not a CSIX index (bad magic)")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"{path}: unsupported format version {version}")
    (header_len,) = r.unpack("<I")
    try:
        header = json.loads(r.take(header_len).decode("utf-8"))
    except ValueError as exc:
        raise IndexFormatError(f"{path}: corrupt header") from exc
    num_categories = header["num_categories"]
    (num_records,) = r.unpack("<I")
    records = []
    for _ in range(num_records):
        (blob_len,) = r.unpack("<Q")
        records.append(_unpack_record(_Reader(r.take(blob_len)), num_categories))
    return ExemplarLibrary(
        data_root if data_root is not None else header["data_root"],
        records,
        num_categories,
        header["category_names"],
    )
