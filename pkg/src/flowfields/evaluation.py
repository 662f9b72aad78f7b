"""Endpoint-error metrics and flow colour coding."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .matcher import FlowField


class EmptyEvaluationError(ValueError):
    pass


@dataclass
class GroundTruth:
    flow: FlowField
    occlusion: np.ndarray | None = None  # True where occluded

    @property
    def evaluable(self) -> np.ndarray:
        mask = self.flow.valid.copy()
        if self.occlusion is not None:
            if self.occlusion.shape != mask.shape:
                raise ValueError("occlusion mask and ground truth differ in size")
            mask &= ~self.occlusion
        return mask


@dataclass
class EvalReport:
    epe: float
    epe10: float
    pct_le3: float
    count: int
    threshold: float = 3.0
    cap: float = 10.0

    def to_json(self) -> str:
        return json.dumps(asdict(self))

    def __str__(self) -> str:
        return (f"EPE {self.epe:.4f} px | EPE{self.cap:g} {self.epe10:.4f} px | "
                f"<{self.threshold:g}px {100 * self.pct_le3:.2f}% | {self.count} px")


def endpoint_errors(est: np.ndarray, gt: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.asarray(est) - np.asarray(gt), axis=-1)


def evaluate(est: FlowField, gt: GroundTruth, threshold: float = 3.0, cap: float = 10.0) -> EvalReport:
    """Metrics over ground-truth-valid, non-occluded pixels that have an estimate.

    ``pct_le3`` counts errors strictly below ``threshold``; ``epe10`` averages
    errors capped at ``cap``.
    """
    if est.flow.shape != gt.flow.flow.shape:
        raise ValueError(f"shape mismatch: {est.flow.shape} vs {gt.flow.flow.shape}")
    mask = gt.evaluable & est.valid
    if not mask.any():
        raise EmptyEvaluationError("no evaluable pixels")
    err = endpoint_errors(est.flow[mask], gt.flow.flow[mask])
    return EvalReport(float(err.mean()), float(np.minimum(err, cap).mean()),
                      float((err < threshold).mean()), int(mask.sum()), threshold, cap)


def _color_wheel() -> np.ndarray:
    # Middlebury colour wheel: RY, YG, GC, CB, BM, MR segments
    segments = (15, 6, 4, 11, 13, 6)
    wheel = np.zeros((sum(segments), 3))
    col = 0
    for i, n in enumerate(segments):
        ramp = np.arange(n) / n
        rising = i % 2 == 0
        main, other = (i // 2) % 3, ((i // 2) + 1) % 3
        if rising:
            # hold ``main`` at 1, raise the next channel
            wheel[col:col + n, main] = 1.0
            wheel[col:col + n, other] = ramp
        else:
            wheel[col:col + n, other] = 1.0
            wheel[col:col + n, main] = 1.0 - ramp
        col += n
    return wheel


COLOR_WHEEL = _color_wheel()


def flow_to_color(F, max_mag: float | None = None) -> np.ndarray:
    """Colour-code a flow field as ``(H, W, 3)`` uint8; zero flow is white, invalid black."""
    if not isinstance(F, FlowField):
        F = FlowField.from_flow(F)
    u, v = F.flow[..., 0], F.flow[..., 1]
    valid = F.valid & np.isfinite(u) & np.isfinite(v)
    mag = np.hypot(u, v)
    if max_mag is None:
        max_mag = float(mag[valid].max()) if valid.any() else 1.0
    max_mag = max(max_mag, 1e-12)
    rad = np.where(valid, mag / max_mag, 0.0)
    ang = np.arctan2(-np.where(valid, v, 0), -np.where(valid, u, 0)) / np.pi
    ncols = COLOR_WHEEL.shape[0]
    fk = (ang + 1) / 2 * (ncols - 1)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % ncols
    f = (fk - k0)[..., None]
    col = (1 - f) * COLOR_WHEEL[k0] + f * COLOR_WHEEL[k1]
    r = rad[..., None]
    col = np.where(r <= 1, 1 - r * (1 - col), col * 0.75)
    img = np.floor(255 * np.clip(col, 0, 1)).astype(np.uint8)
    img[~valid] = 0
    return img
