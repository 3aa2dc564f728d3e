"""Desk-scale quality measurements.

These replace the deep-network evaluation metrics the synthesis
literature uses (FID, pretrained-segmenter accuracy): they are declared
proxies, never comparable to published absolute numbers. All of them
are deterministic pure reads of a composite and the library.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .compose import Composite, SynthesisConfig, synthesize
from .index import ExemplarLibrary
from .raster import InstanceMap, LabelMap
from .canvas import STAGE_PART, STAGE_PIXEL, STAGE_SHAPE


def rebuild_instance_map(lib_or_shapes, exemplar_id: int | None = None) -> InstanceMap:
    """Reconstruct an instance map from a record's shape inventory."""
    if exemplar_id is not None:
        rec = lib_or_shapes.record(exemplar_id)
        shapes, shape_hw = rec.shapes, rec.labels.data.shape
    else:
        shapes, shape_hw = lib_or_shapes
    inst = np.zeros(shape_hw, dtype=np.uint16)
    for s in shapes:
        if s.instance_id == 0:
            continue
        r0, c0, rows, cols = s.bbox
        region = inst[r0 : r0 + rows, c0 : c0 + cols]
        region[s.mask] = s.instance_id
    return InstanceMap(inst)


def self_reconstruction(lib: ExemplarLibrary, exemplar_id: int,
                        config: SynthesisConfig = SynthesisConfig()) -> float:
    """Fraction of pixels reproduced exactly when an exemplar's own maps
    are used as the query."""
    rec = lib.record(exemplar_id)
    instances = rebuild_instance_map(lib, exemplar_id)
    composite = synthesize(rec.labels, instances, lib, config)
    original = lib.image(exemplar_id)
    if composite.image.shape != original.shape:
        raise ValueError("self-reconstruction needs output_size = input size")
    return float((composite.image == original).all(axis=2).mean())


@dataclass(frozen=True)
class StageReport:
    shape_fraction: float
    part_fraction: float
    pixel_fraction: float
    fill_coverage: float
    survivor_fraction: float
    timings: dict
    written: dict

    def to_dict(self) -> dict:
        return {
            "shape_fraction": self.shape_fraction,
            "part_fraction": self.part_fraction,
            "pixel_fraction": self.pixel_fraction,
            "fill_coverage": self.fill_coverage,
            "survivor_fraction": self.survivor_fraction,
            "timings": dict(self.timings),
            "written": dict(self.written),
        }

    def to_text(self) -> str:
        lines = [
            f"shape_fraction={self.shape_fraction:.6f}",
            f"part_fraction={self.part_fraction:.6f}",
            f"pixel_fraction={self.pixel_fraction:.6f}",
            f"fill_coverage={self.fill_coverage:.6f}",
            f"survivor_fraction={self.survivor_fraction:.6f}",
        ]
        lines += [f"time_{k}_seconds={v:.4f}" for k, v in self.timings.items()]
        lines += [f"written_{k}={v}" for k, v in self.written.items()]
        return "\n".join(lines)


def stage_report(composite: Composite) -> StageReport:
    """Per-stage fill fractions over labeled pixels, plus timings and the
    pruning survivor fraction."""
    labeled = composite.labeled
    total = max(1, int(labeled.sum()))

    def frac(stage_code: int) -> float:
        return float(((composite.stage == stage_code) & labeled).sum() / total)

    stats = composite.stage_stats
    return StageReport(
        shape_fraction=frac(STAGE_SHAPE),
        part_fraction=frac(STAGE_PART),
        pixel_fraction=frac(STAGE_PIXEL),
        fill_coverage=float(composite.filled.mean()),
        survivor_fraction=stats["survivors"] / max(1, stats["library_size"]),
        timings=stats["timings"],
        written=stats["written"],
    )


def label_agreement(composite: Composite, query_labels: LabelMap,
                    lib: ExemplarLibrary) -> float:
    """Fraction of filled pixels whose donor label equals the query label.

    The donor pixel is the nearest label-map position to the stored
    fractional donor coordinates. Shape-stage pixels agree by
    construction; part and pixel stages measure how faithful the local
    matches are. An empty composite scores 1.0 vacuously.
    """
    filled = composite.filled
    if not filled.any():
        return 1.0
    qr, qc = np.nonzero(filled)
    query_cat = query_labels.data[qr, qc]
    donor_ex = composite.donor_exemplar[qr, qc]
    donor_r = composite.donor_r[qr, qc].astype(np.float64)
    donor_c = composite.donor_c[qr, qc].astype(np.float64)
    agree = np.zeros(qr.size, dtype=bool)
    for ex in np.unique(donor_ex):
        sel = donor_ex == ex
        lab = lib.record(int(ex)).labels.data
        rr = np.clip(np.floor(donor_r[sel] + 0.5).astype(np.intp), 0, lab.shape[0] - 1)
        cc = np.clip(np.floor(donor_c[sel] + 0.5).astype(np.intp), 0, lab.shape[1] - 1)
        agree[sel] = lab[rr, cc] == query_cat[sel]
    return float(agree.mean())
