"""Mutable working state of one synthesis: pixels, fill state, provenance.

Every stage writes through Canvas.write, which enforces the two global
fill rules: a pixel is written at most once (first write wins, later
stages only touch unfilled pixels) and every written pixel records which
stage and exemplar supplied it, plus the fractional donor coordinates in
that exemplar's full-resolution frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

STAGE_NONE = 0
STAGE_SHAPE = 1
STAGE_PART = 2
STAGE_PIXEL = 3

STAGE_NAMES = {STAGE_NONE: "none", STAGE_SHAPE: "shape", STAGE_PART: "part", STAGE_PIXEL: "pixel"}


@dataclass
class FillReport:
    """What one fill call wrote; picks carry per-cell winner diagnostics."""

    stage: int
    pixels_written: int = 0
    skipped: list[str] = field(default_factory=list)
    picks: list[tuple] = field(default_factory=list)


class Canvas:
    def __init__(self, height: int, width: int):
        self.image = np.zeros((height, width, 3), dtype=np.uint8)
        self.filled = np.zeros((height, width), dtype=bool)
        self.stage = np.zeros((height, width), dtype=np.uint8)
        self.donor_exemplar = np.full((height, width), -1, dtype=np.int32)
        self.donor_r = np.zeros((height, width), dtype=np.float32)
        self.donor_c = np.zeros((height, width), dtype=np.float32)

    @property
    def shape(self) -> tuple[int, int]:
        return self.filled.shape

    def write(self, rows: np.ndarray, cols: np.ndarray, rgb: np.ndarray,
              stage: int, exemplar_id: int,
              donor_r: np.ndarray, donor_c: np.ndarray) -> int:
        """Write RGB at the given positions, skipping already-filled ones."""
        open_sel = ~self.filled[rows, cols]
        if not open_sel.any():
            return 0
        r = rows[open_sel]
        c = cols[open_sel]
        self.image[r, c] = rgb[open_sel]
        self.filled[r, c] = True
        self.stage[r, c] = stage
        self.donor_exemplar[r, c] = exemplar_id
        self.donor_r[r, c] = donor_r[open_sel]
        self.donor_c[r, c] = donor_c[open_sel]
        return int(open_sel.sum())

    def fill_fraction(self) -> float:
        return float(self.filled.mean())
