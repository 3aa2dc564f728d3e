"""Exemplar-based image synthesis from semantic and instance label maps.

The pipeline composes photographs from a library of labeled exemplars by
matching hierarchically: whole scenes, then shapes, then local parts,
then residual pixels. No learning anywhere; everything is deterministic
matching against the library, which also makes every output directly
editable (swap a shape's candidate, move a shape, repaint a region).
"""

from .raster import (
    BORDER,
    UNLABELED,
    InstanceMap,
    LabelMap,
    RasterError,
    ShapeInstance,
    extract_shapes,
    hamming_norm,
    indicator_vector,
    label_histogram,
    resize_labels,
)
from .index import (
    DatasetError,
    ExemplarLibrary,
    ExemplarRecord,
    IndexFormatError,
    build_record,
    ingest,
    load_index,
    save_index,
)
from .retrieval import GlobalMatch, coverage_scores, prune_by_categories, top_n
from .shapes import (
    Candidate,
    CandidateSet,
    ShapeDescriptor,
    build_descriptor,
    retrieve_candidates,
    score_shape,
    transfer_shape_rgb,
)
from .parts import PartGrid, build_part_grid, fill_parts, score_patch
from .pixels import fill_pixels, pixel_window
from .compose import (
    Composite,
    DeleteShape,
    InsertShape,
    InvalidEditError,
    MoveShape,
    PaintLabel,
    ScaleShape,
    SceneEdit,
    SynthesisConfig,
    apply_edit,
    recompose_with_selection,
    sample_variants,
    synthesize,
)
from .metrics import label_agreement, self_reconstruction, stage_report
from .toygen import ToySpec, generate as generate_toy_dataset

__version__ = "0.1.0"

__all__ = [
    "BORDER",
    "UNLABELED",
    "Candidate",
    "CandidateSet",
    "Composite",
    "DatasetError",
    "DeleteShape",
    "ExemplarLibrary",
    "ExemplarRecord",
    "GlobalMatch",
    "IndexFormatError",
    "InsertShape",
    "InstanceMap",
    "InvalidEditError",
    "LabelMap",
    "MoveShape",
    "PaintLabel",
    "PartGrid",
    "RasterError",
    "ScaleShape",
    "SceneEdit",
    "ShapeDescriptor",
    "ShapeInstance",
    "SynthesisConfig",
    "ToySpec",
    "apply_edit",
    "build_descriptor",
    "build_part_grid",
    "build_record",
    "coverage_scores",
    "extract_shapes",
    "fill_parts",
    "fill_pixels",
    "generate_toy_dataset",
    "hamming_norm",
    "indicator_vector",
    "ingest",
    "label_agreement",
    "label_histogram",
    "load_index",
    "pixel_window",
    "prune_by_categories",
    "recompose_with_selection",
    "resize_labels",
    "retrieve_candidates",
    "sample_variants",
    "save_index",
    "score_patch",
    "score_shape",
    "self_reconstruction",
    "stage_report",
    "synthesize",
    "top_n",
    "transfer_shape_rgb",
]
