"""Raster primitives shared by every synthesis stage.

Label and instance maps are thin immutable wrappers around uint16 numpy
arrays; shapes are connected labeled regions extracted from a map pair.
All resampling helpers here pin an exact convention (center-of-cell for
nearest, half-pixel centers for bilinear) so the pipeline is byte
deterministic across runs and worker counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

# Sentinel category for pixels without a semantic label: the max value a
# uint16 can hold, so it can never collide with a real category id.
UNLABELED = 0xFFFF
# Sentinel for out-of-bounds cells in context descriptors. Distinct from
# every category and from UNLABELED; matches only itself.
BORDER = 0xFFFE


class RasterError(ValueError):
    """Invalid raster input (dimension mismatch, bad values, bad pairing)."""


def _as_readonly(data, dtype) -> np.ndarray:
    arr = np.ascontiguousarray(data, dtype=dtype)
    # Never freeze the caller's buffer: detach before marking read-only.
    if isinstance(data, np.ndarray) and arr.flags.writeable and np.shares_memory(arr, data):
        arr = arr.copy()
    arr.setflags(write=False)
    return arr


def _as_readonly_u16(data: np.ndarray) -> np.ndarray:
    return _as_readonly(data, np.uint16)


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel semantic category ids (uint16, row-major).

    Values are either a category id in [0, num_categories) or UNLABELED.
    """

    data: np.ndarray
    num_categories: int

    def __post_init__(self):
        object.__setattr__(self, "data", _as_readonly_u16(self.data))
        if self.data.ndim != 2 or self.data.size == 0:
            raise RasterError(f"label map must be a non-empty 2-D array, got shape {self.data.shape}")
        if not (0 < self.num_categories <= UNLABELED):
            raise RasterError(f"num_categories out of range: {self.num_categories}")
        labeled = self.data[self.data != UNLABELED]
        if labeled.size and int(labeled.max()) >= self.num_categories:
            raise RasterError(
                f"category id {int(labeled.max())} exceeds num_categories={self.num_categories}"
            )

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class InstanceMap:
    """Per-pixel object-instance ids (uint16); 0 means stuff / no instance."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_readonly_u16(self.data))
        if self.data.ndim != 2 or self.data.size == 0:
            raise RasterError(f"instance map must be a non-empty 2-D array, got shape {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class ShapeInstance:
    """One connected labeled region: a thing instance or a stuff component.

    bbox is (row0, col0, rows, cols) and is tight around the bbox-local
    boolean mask. instance_id is 0 for stuff components. exemplar_id is
    None for shapes extracted from a query, else the owning exemplar.
    """

    shape_id: int
    category: int
    instance_id: int
    bbox: tuple[int, int, int, int]
    mask: np.ndarray
    area: int
    exemplar_id: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "mask", _as_readonly(self.mask, bool))
        r0, c0, rows, cols = self.bbox
        if self.mask.shape != (rows, cols):
            raise RasterError(f"mask shape {self.mask.shape} does not match bbox {self.bbox}")
        if self.area < 1 or int(self.mask.sum()) != self.area:
            raise RasterError("shape area must equal the active mask pixel count and be >= 1")

    @property
    def aspect(self) -> float:
        """Bounding-box width/height ratio."""
        _, _, rows, cols = self.bbox
        return cols / rows


def label_map_trusted(data: np.ndarray, num_categories: int) -> LabelMap:
    """Wrap freshly-allocated, already-validated data without re-checking.

    Only for loaders that produced the array themselves (index reader);
    skips the per-pixel range scan and the defensive copy.
    """
    data.setflags(write=False)
    m = object.__new__(LabelMap)
    object.__setattr__(m, "data", data)
    object.__setattr__(m, "num_categories", num_categories)
    return m


def shape_trusted(shape_id: int, category: int, instance_id: int,
                  bbox: tuple[int, int, int, int], mask: np.ndarray,
                  area: int, exemplar_id: int | None) -> ShapeInstance:
    """ShapeInstance counterpart of label_map_trusted."""
    mask.setflags(write=False)
    s = object.__new__(ShapeInstance)
    object.__setattr__(s, "shape_id", shape_id)
    object.__setattr__(s, "category", category)
    object.__setattr__(s, "instance_id", instance_id)
    object.__setattr__(s, "bbox", bbox)
    object.__setattr__(s, "mask", mask)
    object.__setattr__(s, "area", area)
    object.__setattr__(s, "exemplar_id", exemplar_id)
    return s


def check_paired(labels: LabelMap, instances: InstanceMap) -> None:
    if labels.data.shape != instances.data.shape:
        raise RasterError(
            f"label map {labels.data.shape} and instance map {instances.data.shape} differ in size"
        )


# 4-connectivity: stuff regions split at diagonal contact.
_FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def _tight_bbox(mask: np.ndarray) -> tuple[int, int, int, int]:
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1 = int(rows[0]), int(rows[-1])
    c0, c1 = int(cols[0]), int(cols[-1])
    return r0, c0, r1 - r0 + 1, c1 - c0 + 1


def extract_shapes(labels: LabelMap, instances: InstanceMap) -> list[ShapeInstance]:
    """Split a map pair into shapes.

    One shape per nonzero instance id (its pixels may be disconnected by
    occlusion), plus one shape per 4-connected component of each category
    over the remaining instance-0 pixels. Together the shape masks
    partition the labeled pixels. Ordering is (category, first scan
    position); shape_id is the index in that order.
    """
    check_paired(labels, instances)
    lab = labels.data
    inst = instances.data
    width = labels.width
    found: list[tuple[int, int, ShapeInstance]] = []

    def _add(category, instance_id, full_mask):
        r0, c0, rows, cols = _tight_bbox(full_mask)
        local = full_mask[r0 : r0 + rows, c0 : c0 + cols]
        scan_pos = int(np.argmax(full_mask))
        shape = ShapeInstance(
            shape_id=-1,
            category=int(category),
            instance_id=int(instance_id),
            bbox=(r0, c0, rows, cols),
            mask=local,
            area=int(full_mask.sum()),
            exemplar_id=None,
        )
        found.append((int(category), scan_pos, shape))

    for iid in np.unique(inst):
        if iid == 0:
            continue
        full_mask = inst == iid
        cats = np.unique(lab[full_mask])
        if len(cats) != 1:
            raise RasterError(f"instance {int(iid)} spans categories {cats.tolist()}")
        if cats[0] == UNLABELED:
            raise RasterError(f"instance {int(iid)} sits on unlabeled pixels")
        _add(cats[0], iid, full_mask)

    stuff = inst == 0
    for cat in np.unique(lab[stuff]):
        if cat == UNLABELED:
            continue
        cat_mask = stuff & (lab == cat)
        comp, n = ndimage.label(cat_mask, structure=_FOUR_CONNECTED)
        for slc_idx, slc in enumerate(ndimage.find_objects(comp, n)):
            if slc is None:
                continue
            full_mask = np.zeros_like(cat_mask)
            full_mask[slc] = comp[slc] == slc_idx + 1
            _add(cat, 0, full_mask)

    found.sort(key=lambda item: (item[0], item[1]))
    out = []
    for sid, (_, _, shape) in enumerate(found):
        object.__setattr__(shape, "shape_id", sid)
        out.append(shape)
    return out


def nearest_resize(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbor resample with center-of-cell sampling.

    Output pixel i reads input index floor((i + 0.5) * in / out); no value
    blending, so the output value set is a subset of the input's.
    """
    if out_h < 1 or out_w < 1:
        raise RasterError(f"resize target must be >= 1x1, got {out_h}x{out_w}")
    in_h, in_w = arr.shape[:2]
    rows = np.minimum((np.arange(out_h) + 0.5) * in_h / out_h, in_h - 1).astype(np.intp)
    cols = np.minimum((np.arange(out_w) + 0.5) * in_w / out_w, in_w - 1).astype(np.intp)
    return arr[np.ix_(rows, cols)] if arr.ndim == 2 else arr[rows][:, cols]


def resize_labels(m: LabelMap, out_w: int, out_h: int) -> LabelMap:
    """Resize a label map; categories are never interpolated."""
    return LabelMap(nearest_resize(m.data, out_h, out_w), m.num_categories)


def bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample an image at fractional pixel-center coordinates.

    Coordinates are clipped to the valid range, so sampling at integer
    positions returns exact pixel values. Works for 2-D and (H, W, C).
    """
    h, w = img.shape[:2]
    r = np.clip(rows, 0.0, h - 1.0)
    c = np.clip(cols, 0.0, w - 1.0)
    r0 = np.floor(r).astype(np.intp)
    c0 = np.floor(c).astype(np.intp)
    r1 = np.minimum(r0 + 1, h - 1)
    c1 = np.minimum(c0 + 1, w - 1)
    fr = r - r0
    fc = c - c0
    if img.ndim == 3:
        fr = fr[..., None]
        fc = fc[..., None]
    vals = (
        img[r0, c0] * (1 - fr) * (1 - fc)
        + img[r0, c1] * (1 - fr) * fc
        + img[r1, c0] * fr * (1 - fc)
        + img[r1, c1] * fr * fc
    )
    return vals


def bilinear_sample_u8(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    vals = bilinear_sample(img.astype(np.float64), rows, cols)
    return np.rint(vals).astype(np.uint8)


def bilinear_resize_rgb(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear RGB resize with half-pixel centers; identity at equal size."""
    if out_h < 1 or out_w < 1:
        raise RasterError(f"resize target must be >= 1x1, got {out_h}x{out_w}")
    if img.ndim != 3:
        raise RasterError(f"expected (H, W, C) image, got shape {img.shape}")
    in_h, in_w = img.shape[:2]
    if (out_h, out_w) == (in_h, in_w):
        return img.copy()
    rr = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    cc = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    rows = np.repeat(rr, out_w)
    cols = np.tile(cc, out_h)
    return bilinear_sample_u8(img, rows, cols).reshape(out_h, out_w, img.shape[2])


def label_histogram(m: LabelMap) -> np.ndarray:
    """Normalized category histogram over the labeled pixels.

    Entry c is the fraction of non-sentinel pixels with category c; an
    all-sentinel map yields the zero vector.
    """
    labeled = m.data[m.data != UNLABELED]
    counts = np.bincount(labeled.ravel(), minlength=m.num_categories).astype(np.float64)
    total = counts.sum()
    if total == 0:
        return np.zeros(m.num_categories, dtype=np.float64)
    return counts / total


def indicator_vector(m: LabelMap) -> np.ndarray:
    """Presence bit per category: set iff at least one pixel has it."""
    labeled = m.data[m.data != UNLABELED]
    counts = np.bincount(labeled.ravel(), minlength=m.num_categories)
    return counts > 0


def hamming_norm(a: LabelMap, b: LabelMap) -> float:
    """Fraction of positions where the two maps disagree (sentinel counts
    as an ordinary distinct value)."""
    if a.data.shape != b.data.shape:
        raise RasterError(f"hamming_norm needs equal sizes, got {a.data.shape} vs {b.data.shape}")
    return float((a.data != b.data).mean())
