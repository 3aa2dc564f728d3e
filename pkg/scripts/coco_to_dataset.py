#!/usr/bin/env python3
"""Convert COCO-style instance annotations to the PNG dataset layout.

Reads a COCO annotation JSON (polygon and RLE segmentations, both
uncompressed counts lists and compressed count strings) plus the matching
image directory, and writes:

    <out>/images/<id>.png      8-bit RGB copies
    <out>/labels/<id>.png      16-bit category ids (65535 = unlabeled)
    <out>/instances/<id>.png   16-bit instance ids (0 = stuff / crowd)
    <out>/categories.txt       one name per line, line number = dense id

COCO category ids are sparse; they are remapped to dense ids in ascending
order. Overlapping annotations are painted in annotation order (later
wins). This is a convenience converter, not part of the engine contract.

    python3 scripts/coco_to_dataset.py \
        --annotations instances_train2017.json \
        --images train2017/ --out coco_dataset/ [--limit 1000]
"""

import argparse
import json
import sys
from pathlib import Path

import cv2
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from labelcollage import pngio  # noqa: E402
from labelcollage.raster import UNLABELED  # noqa: E402


def decode_rle_counts(counts, h, w) -> np.ndarray:
    """Uncompressed RLE: alternating run lengths of 0s and 1s, column-major."""
    mask = np.zeros(h * w, dtype=np.uint8)
    pos = 0
    val = 0
    for run in counts:
        if val:
            mask[pos : pos + run] = 1
        pos += run
        val ^= 1
    return mask.reshape(w, h).T


def decode_rle_string(s: str, h: int, w: int) -> np.ndarray:
    """COCO compressed RLE: 5-bit varint deltas, ASCII offset 48."""
    counts = []
    i = 0
    while i < len(s):
        x = 0
        k = 0
        more = True
        while more:
            c = ord(s[i]) - 48
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            i += 1
            k += 1
            if not more and (c & 0x10):
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return decode_rle_counts(counts, h, w)


def rasterize_annotation(ann, h, w) -> np.ndarray:
    seg = ann["segmentation"]
    if isinstance(seg, dict):
        counts = seg["counts"]
        if isinstance(counts, str):
            return decode_rle_string(counts, h, w)
        return decode_rle_counts(counts, h, w)
    mask = np.zeros((h, w), dtype=np.uint8)
    for poly in seg:
        pts = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
        cv2.fillPoly(mask, [np.round(pts).astype(np.int32)], 1)
    return mask


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--annotations", required=True)
    parser.add_argument("--images", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--limit", type=int, default=None,
                        help="convert at most this many images")
    args = parser.parse_args()

    coco = json.loads(Path(args.annotations).read_text())
    categories = sorted(coco["categories"], key=lambda c: c["id"])
    dense = {c["id"]: i for i, c in enumerate(categories)}

    out = Path(args.out)
    for sub in ("images", "labels", "instances"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    (out / "categories.txt").write_text("".join(c["name"] + "\n" for c in categories))

    by_image: dict[int, list] = {}
    for ann in coco["annotations"]:
        by_image.setdefault(ann["image_id"], []).append(ann)

    images = coco["images"]
    if args.limit is not None:
        images = images[: args.limit]
    converted = 0
    for info in images:
        src = Path(args.images) / info["file_name"]
        if not src.exists():
            print(f"skipping {info['file_name']}: image missing", file=sys.stderr)
            continue
        h, w = info["height"], info["width"]
        labels = np.full((h, w), UNLABELED, dtype=np.uint16)
        instances = np.zeros((h, w), dtype=np.uint16)
        next_instance = 1
        for ann in by_image.get(info["id"], []):
            mask = rasterize_annotation(ann, h, w).astype(bool)
            if not mask.any():
                continue
            labels[mask] = dense[ann["category_id"]]
            if ann.get("iscrowd", 0):
                instances[mask] = 0
            else:
                instances[mask] = next_instance
                next_instance += 1
        stem = f"{info['id']:012d}"
        img = cv2.imread(str(src), cv2.IMREAD_COLOR)
        if img is None:
            print(f"skipping {info['file_name']}: unreadable", file=sys.stderr)
            continue
        pngio.write_rgb(out / "images" / f"{stem}.png", img[..., ::-1])
        pngio.write_gray16(out / "labels" / f"{stem}.png", labels)
        pngio.write_gray16(out / "instances" / f"{stem}.png", instances)
        converted += 1
    print(f"converted {converted} images -> {out}")
    return 0 if converted else 1


if __name__ == "__main__":
    sys.exit(main())
