"""PNG encode/decode for the dataset layout.

Label and instance maps travel as 16-bit grayscale PNGs, RGB images as
8-bit color PNGs. One encoding everywhere: disk datasets, the HTTP
service, and CLI outputs all share these helpers. OpenCV works in BGR,
so channel swaps stay confined to this module.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

# Low compression level: deterministic output and fast enough for the
# thousands of small files a toy dataset writes.
_PNG_PARAMS = [cv2.IMWRITE_PNG_COMPRESSION, 1]


class PngError(ValueError):
    """Unreadable or wrongly-typed PNG payload."""


def read_gray16(path: str | Path) -> np.ndarray:
    arr = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise PngError(f"cannot read PNG: {path}")
    return _coerce_gray16(arr, str(path))


def write_gray16(path: str | Path, data: np.ndarray) -> None:
    arr = np.ascontiguousarray(data, dtype=np.uint16)
    if not cv2.imwrite(str(path), arr, _PNG_PARAMS):
        raise PngError(f"cannot write PNG: {path}")


def read_rgb(path: str | Path) -> np.ndarray:
    arr = cv2.imread(str(path), cv2.IMREAD_COLOR)
    if arr is None:
        raise PngError(f"cannot read PNG: {path}")
    return np.ascontiguousarray(arr[..., ::-1])


def write_rgb(path: str | Path, rgb: np.ndarray) -> None:
    arr = np.ascontiguousarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise PngError(f"expected (H, W, 3) RGB array, got shape {arr.shape}")
    if not cv2.imwrite(str(path), arr[..., ::-1], _PNG_PARAMS):
        raise PngError(f"cannot write PNG: {path}")


def encode_gray16(data: np.ndarray) -> bytes:
    ok, buf = cv2.imencode(".png", np.ascontiguousarray(data, dtype=np.uint16), _PNG_PARAMS)
    if not ok:
        raise PngError("PNG encoding failed")
    return buf.tobytes()


def encode_rgb(rgb: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(rgb, dtype=np.uint8)
    ok, buf = cv2.imencode(".png", arr[..., ::-1], _PNG_PARAMS)
    if not ok:
        raise PngError("PNG encoding failed")
    return buf.tobytes()


def decode_gray16(payload: bytes) -> np.ndarray:
    arr = cv2.imdecode(np.frombuffer(payload, dtype=np.uint8), cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise PngError("cannot decode PNG payload")
    return _coerce_gray16(arr, "<payload>")


def decode_rgb(payload: bytes) -> np.ndarray:
    arr = cv2.imdecode(np.frombuffer(payload, dtype=np.uint8), cv2.IMREAD_COLOR)
    if arr is None:
        raise PngError("cannot decode PNG payload")
    return np.ascontiguousarray(arr[..., ::-1])


def _coerce_gray16(arr: np.ndarray, origin: str) -> np.ndarray:
    if arr.ndim != 2:
        raise PngError(f"{origin}: expected single-channel PNG, got shape {arr.shape}")
    if arr.dtype == np.uint16:
        return arr
    if arr.dtype == np.uint8:
        return arr.astype(np.uint16)
    raise PngError(f"{origin}: unsupported dtype {arr.dtype}")
