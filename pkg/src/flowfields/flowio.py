"""Flow files: Middlebury ``.flo`` and KITTI 16-bit PNG, plus occlusion masks."""
from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from .matcher import FlowField

FLO_MAGIC = b"PIEH"
FLO_UNKNOWN = 1e9
KITTI_SCALE = 64.0
KITTI_OFFSET = 2 ** 15


class FlowFormatError(ValueError):
    pass


def _guess_format(path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".flo":
        return "flo"
    if suffix == ".png":
        return "kitti"
    raise FlowFormatError(f"cannot infer flow format from {path!r}")


def write_flow(F, path, fmt: str | None = None) -> None:
    """Write a FlowField (or ``(H, W, 2)`` array); invalid pixels become unknown."""
    if not isinstance(F, FlowField):
        F = FlowField.from_flow(F)
    fmt = fmt or _guess_format(path)
    if fmt == "flo":
        data = F.flow.astype(np.float32)
        data[~F.valid] = np.float32(FLO_UNKNOWN * 10)
        h, w = data.shape[:2]
        with open(path, "wb") as fh:
            fh.write(FLO_MAGIC)
            fh.write(np.array([w, h], dtype="<i4").tobytes())
            fh.write(data.astype("<f4").tobytes())
    elif fmt == "kitti":
        enc = np.clip(np.round(F.flow * KITTI_SCALE + KITTI_OFFSET), 0, 65535).astype(np.uint16)
        enc[~F.valid] = 0
        out = np.dstack([F.valid.astype(np.uint16), enc[..., 1], enc[..., 0]])  # BGR order
        if not cv2.imwrite(str(path), out):
            raise OSError(f"could not write {path}")
    else:
        raise FlowFormatError(f"unknown flow format {fmt!r}")


def read_flow(path, fmt: str | None = None) -> FlowField:
    fmt = fmt or _guess_format(path)
    if fmt == "flo":
        raw = Path(path).read_bytes()
        if len(raw) < 12 or raw[:4] != FLO_MAGIC:
            raise FlowFormatError(f"{path}: bad .flo magic")
        w, h = np.frombuffer(raw[4:12], dtype="<i4")
        if w <= 0 or h <= 0:
            raise FlowFormatError(f"{path}: bad dimensions {w}x{h}")
        need = 12 + int(w) * int(h) * 8
        if len(raw) != need:
            raise FlowFormatError(f"{path}: expected {need} bytes, found {len(raw)}")
        data = np.frombuffer(raw[12:], dtype="<f4").reshape(h, w, 2).astype(np.float64)
        valid = np.all(np.isfinite(data) & (np.abs(data) < FLO_UNKNOWN), axis=2)
        return FlowField.from_flow(data, valid)
    if fmt == "kitti":
        img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise FlowFormatError(f"{path}: unreadable PNG")
        if img.dtype != np.uint16 or img.ndim != 3 or img.shape[2] != 3:
            raise FlowFormatError(f"{path}: expected a 16-bit 3-channel PNG")
        u = (img[..., 2].astype(np.float64) - KITTI_OFFSET) / KITTI_SCALE
        v = (img[..., 1].astype(np.float64) - KITTI_OFFSET) / KITTI_SCALE
        return FlowField.from_flow(np.dstack([u, v]), img[..., 0] > 0)
    raise FlowFormatError(f"unknown flow format {fmt!r}")


def read_mask(path) -> np.ndarray:
    """Boolean mask from a PNG; nonzero pixels are True (occluded)."""
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 0


def write_mask(mask: np.ndarray, path) -> None:
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path)
