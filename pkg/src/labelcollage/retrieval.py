"""Stage 1: prune the library by category sets, rank by coverage.

An exemplar survives pruning when its category-presence set equals,
contains, or is contained in the query's. Survivors are ranked by the
sum of a global coverage score (l2 between normalized label histograms)
and a pixel coverage score (normalized hamming distance between 100x100
label maps); lowest combined score wins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .index import ExemplarLibrary, ExemplarRecord
from .raster import (
    InstanceMap,
    LabelMap,
    check_paired,
    indicator_vector,
    label_histogram,
    resize_labels,
)


@dataclass(frozen=True)
class GlobalMatch:
    exemplar_id: int
    global_cov: float
    pixel_cov: float

    @property
    def combined(self) -> float:
        return self.global_cov + self.pixel_cov


def prune_by_categories(query_indicator: np.ndarray, lib: ExemplarLibrary) -> list[int]:
    """Exemplar ids whose category set equals / contains / is contained
    in the query's, ascending."""
    q = np.asarray(query_indicator, dtype=bool)
    if q.shape != (lib.num_categories,):
        raise ValueError(f"indicator length {q.shape} != num_categories {lib.num_categories}")
    ind = lib.indicator_matrix
    query_subset = ~(q & ~ind).any(axis=1)      # query set within exemplar set
    exemplar_subset = ~(ind & ~q).any(axis=1)   # exemplar set within query set
    keep = query_subset | exemplar_subset       # equality is covered by both
    return [int(i) for i in np.flatnonzero(keep)]


def coverage_scores(query_labels: LabelMap, rec: ExemplarRecord) -> GlobalMatch:
    """Score one exemplar against the query (self-contained slow path)."""
    q_hist = label_histogram(query_labels)
    q_low = resize_labels(query_labels, 100, 100)
    global_cov = float(np.sqrt(((q_hist - rec.histogram) ** 2).sum()))
    pixel_cov = float((q_low.data != rec.lowres100.data).mean())
    return GlobalMatch(rec.exemplar_id, global_cov, pixel_cov)


def top_n(query_labels: LabelMap, query_instances: InstanceMap,
          lib: ExemplarLibrary, n: int) -> list[GlobalMatch]:
    """Prune, score survivors, return the n best matches.

    Ordered by combined score then exemplar id. If pruning leaves zero
    survivors (possible after edits introduce unseen category sets), the
    whole library is scored instead.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(lib) == 0:
        raise ValueError("empty exemplar library")
    check_paired(query_labels, query_instances)

    survivors = prune_by_categories(indicator_vector(query_labels), lib)
    if not survivors:
        survivors = list(range(len(lib)))
    ids = np.asarray(survivors, dtype=np.int64)

    q_hist = label_histogram(query_labels)
    q_low = resize_labels(query_labels, 100, 100).data
    hist = lib.histogram_matrix[ids]
    low = lib.lowres100_stack()[ids]
    global_cov = np.sqrt(((hist - q_hist) ** 2).sum(axis=1))
    pixel_cov = (low != q_low).mean(axis=(1, 2))
    combined = global_cov + pixel_cov

    order = np.lexsort((ids, combined))[:n]
    return [
        GlobalMatch(int(ids[i]), float(global_cov[i]), float(pixel_cov[i]))
        for i in order
    ]
