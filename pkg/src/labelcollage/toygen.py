"""Deterministic synthetic scene generator.

Builds exemplar datasets in the standard directory layout so the whole
pipeline can be exercised without any real segmentation data: wavy
banded stuff backgrounds plus limbed, non-convex blobs as thing
instances (limbs make global shape matches miss pixels, which is what
the part stage exists for). Textures keep every channel >= 8 so an
unfilled canvas pixel never accidentally equals a generated one.

Clique mode partitions the usable categories into disjoint groups and
assigns scenes round-robin, giving the indicator-pruning stage something
to cut: queries built from one clique share no categories with any
other clique's scenes. The last `reserve` categories are listed in
categories.txt but never drawn, so tests can paint a category that is
genuinely absent from the library.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np

from . import pngio
from .raster import InstanceMap, LabelMap

_CHANNEL_MIN = 8
_CHANNEL_MAX = 247


@dataclass(frozen=True)
class ToySpec:
    scenes: int
    categories: int
    size: int = 256
    seed: int = 0
    cliques: int | None = None
    reserve: int = 1

    def __post_init__(self):
        if self.scenes < 1 or self.size < 32:
            raise ValueError("need scenes >= 1 and size >= 32")
        usable = self.categories - self.reserve
        groups = self.cliques or 1
        if usable < 3 * groups:
            raise ValueError(
                f"{self.categories} categories (reserve {self.reserve}) cannot fill {groups} cliques; "
                f"need at least {3 * groups + self.reserve}"
            )


def category_pools(spec: ToySpec) -> list[tuple[list[int], list[int]]]:
    """(stuff pool, thing pool) per clique; pools are disjoint across
    cliques and never include reserved categories."""
    usable = list(range(spec.categories - spec.reserve))
    groups = spec.cliques or 1
    per = len(usable) // groups
    pools = []
    for g in range(groups):
        cats = usable[g * per : (g + 1) * per] if g < groups - 1 else usable[(groups - 1) * per :]
        n_stuff = max(2, len(cats) // 3)
        pools.append((cats[:n_stuff], cats[n_stuff:]))
    return pools


def palette(spec: ToySpec) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0xC0102]))
    return rng.integers(40, 216, size=(spec.categories, 3), dtype=np.int64)


def _limbed_blob(rng: np.random.Generator, size: int) -> tuple[np.ndarray, int, int]:
    """Non-convex blob mask: an ellipse body with 2-4 limb ellipses."""
    span = size // 3
    mask = np.zeros((span, span), dtype=np.uint8)
    center = (span // 2, span // 2)
    body = (int(rng.integers(span // 6, span // 3)), int(rng.integers(span // 8, span // 4)))
    angle = float(rng.uniform(0, 180))
    cv2.ellipse(mask, center, body, angle, 0, 360, 1, -1)
    for _ in range(int(rng.integers(2, 5))):
        theta = float(rng.uniform(0, 2 * np.pi))
        reach = int(max(body) * rng.uniform(0.8, 1.4))
        cx = int(center[0] + reach * np.cos(theta))
        cy = int(center[1] + reach * np.sin(theta))
        limb = (int(rng.integers(span // 14, span // 7)), int(rng.integers(span // 20, span // 10)))
        cv2.ellipse(mask, (cx, cy), limb, float(rng.uniform(0, 180)), 0, 360, 1, -1)
    ys, xs = np.nonzero(mask)
    if ys.size == 0:  # degenerate draw, fall back to the bare body
        cv2.ellipse(mask, center, (max(2, body[0]), max(2, body[1])), angle, 0, 360, 1, -1)
        ys, xs = np.nonzero(mask)
    trimmed = mask[ys.min() : ys.max() + 1, xs.min() : xs.max() + 1].astype(bool)
    return trimmed, int(rng.integers(0, size - trimmed.shape[0] + 1)), int(rng.integers(0, size - trimmed.shape[1] + 1))


def _smooth_field(rng: np.random.Generator, size: int, amplitude: float) -> np.ndarray:
    coarse = rng.normal(0.0, amplitude, size=(8, 8))
    return cv2.resize(coarse, (size, size), interpolation=cv2.INTER_LINEAR)


def scene_arrays(spec: ToySpec, scene_index: int,
                 seed_salt: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Labels, instances, and RGB for one scene (pure function of spec,
    index, and salt; the salt lets tests mint non-library queries)."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, seed_salt, scene_index]))
    size = spec.size
    pools = category_pools(spec)
    stuff_pool, thing_pool = pools[scene_index % len(pools)]

    labels = np.zeros((size, size), dtype=np.uint16)
    instances = np.zeros((size, size), dtype=np.uint16)

    n_bands = int(rng.integers(2, min(4, len(stuff_pool)) + 1))
    band_cats = rng.choice(np.array(stuff_pool), size=n_bands, replace=False)
    cuts = np.sort(rng.uniform(0.2, 0.8, size=n_bands - 1)) * size
    xs = np.arange(size)
    rows = np.arange(size)[:, None]
    prev_boundary = np.full(size, -1.0)
    for b in range(n_bands):
        if b < n_bands - 1:
            wave = (size / 18) * np.sin(2 * np.pi * (rng.uniform(0.5, 2.5) * xs / size + rng.uniform()))
            boundary = cuts[b] + wave
        else:
            boundary = np.full(size, float(size))
        sel = (rows >= prev_boundary[None, :]) & (rows < boundary[None, :])
        labels[sel] = band_cats[b]
        prev_boundary = boundary

    n_things = int(rng.integers(2, 6))
    for iid in range(1, n_things + 1):
        blob, r0, c0 = _limbed_blob(rng, size)
        cat = int(rng.choice(np.array(thing_pool)))
        region = (slice(r0, r0 + blob.shape[0]), slice(c0, c0 + blob.shape[1]))
        labels[region][blob] = cat
        instances[region][blob] = iid

    pal = palette(spec)
    rgb = pal[labels].astype(np.float64)
    rgb += _smooth_field(rng, size, 14.0)[..., None]
    rgb += rng.integers(-5, 6, size=rgb.shape)
    return labels, instances, np.clip(rgb, _CHANNEL_MIN, _CHANNEL_MAX).astype(np.uint8)


def generate(spec: ToySpec, out_dir: str | Path) -> Path:
    """Write a full dataset directory; byte-identical for equal specs."""
    root = Path(out_dir)
    for sub in ("images", "labels", "instances"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    (root / "categories.txt").write_text(
        "".join(f"category_{i:03d}\n" for i in range(spec.categories))
    )
    for i in range(spec.scenes):
        labels, instances, rgb = scene_arrays(spec, i)
        stem = f"{i:06d}"
        pngio.write_rgb(root / "images" / f"{stem}.png", rgb)
        pngio.write_gray16(root / "labels" / f"{stem}.png", labels)
        pngio.write_gray16(root / "instances" / f"{stem}.png", instances)
    return root


def scene_maps(spec: ToySpec, scene_index: int, seed_salt: int = 0) -> tuple[LabelMap, InstanceMap]:
    """Scene as typed maps, for building queries in tests and demos."""
    labels, instances, _ = scene_arrays(spec, scene_index, seed_salt)
    return LabelMap(labels, spec.categories), InstanceMap(instances)
