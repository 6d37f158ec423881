"""Axis-aligned box geometry.

Boxes are stored as float arrays ``[x1, y1, x2, y2]`` in continuous pixel
coordinates, with ``x1`` the left edge and ``y1`` the top edge. Batches are
``(N, 4)`` arrays. Every function here is pure.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ImageExtent:
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"image extent must be positive, got {self.width}x{self.height}")

    def as_box(self) -> np.ndarray:
        return np.array([0.0, 0.0, float(self.width), float(self.height)])


def as_boxes(boxes) -> np.ndarray:
    """Return ``boxes`` as a float64 ``(N, 4)`` array (a single box becomes N=1)."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected boxes of shape (N, 4), got {arr.shape}")
    return arr


def area(boxes) -> np.ndarray:
    b = np.asarray(boxes, dtype=np.float64)
    return (b[..., 2] - b[..., 0]) * (b[..., 3] - b[..., 1])


def centers(boxes) -> np.ndarray:
    b = np.asarray(boxes, dtype=np.float64)
    return np.stack([(b[..., 0] + b[..., 2]) / 2, (b[..., 1] + b[..., 3]) / 2], axis=-1)


def iou_matrix(boxes1, boxes2) -> np.ndarray:
    """Pairwise IoU between two box collections.

    Args:
      boxes1: array of shape [N, 4].
      boxes2: array of shape [K, 4].

    Returns:
      array of shape [N, K]. Pairs whose union area is zero get IoU 0.
    """
    a = as_boxes(boxes1)
    b = as_boxes(boxes2)
    iw = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    ih = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    union = area(a)[:, None] + area(b)[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def iou(a, b) -> float:
    """IoU of two single boxes."""
    return float(iou_matrix(a, b)[0, 0])


def clip_boxes(boxes, extent: ImageExtent) -> np.ndarray:
    b = np.asarray(boxes, dtype=np.float64).copy()
    b[..., 0::2] = np.clip(b[..., 0::2], 0.0, extent.width)
    b[..., 1::2] = np.clip(b[..., 1::2], 0.0, extent.height)
    return b


def enlarge(boxes, gamma: float, extent: ImageExtent | None = None) -> np.ndarray:
    """Scale boxes about their centers by ``gamma`` and clip to ``extent``.

    Works on a single box or an ``(N, 4)`` batch; the output has the same shape
    as the input. ``extent=None`` means an unbounded plane.
    """
    if gamma < 1:
        raise ValueError(f"enlargement factor must be >= 1, got {gamma}")
    b = np.asarray(boxes, dtype=np.float64)
    c = centers(b)
    half_w = (b[..., 2] - b[..., 0]) * gamma / 2
    half_h = (b[..., 3] - b[..., 1]) * gamma / 2
    out = np.stack(
        [c[..., 0] - half_w, c[..., 1] - half_h, c[..., 0] + half_w, c[..., 1] + half_h],
        axis=-1,
    )
    if extent is not None:
        out = clip_boxes(out, extent)
    return out


def intersect(a, b) -> np.ndarray:
    """Elementwise intersection box of ``a`` and ``b`` (empty results collapse to zero size)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    lo = np.maximum(a[..., :2], b[..., :2])
    hi = np.minimum(a[..., 2:], b[..., 2:])
    hi = np.maximum(hi, lo)
    return np.concatenate([lo, hi], axis=-1)


def contains(outer, inner, tol: float = 1e-9) -> np.ndarray:
    o = np.asarray(outer, dtype=np.float64)
    i = np.asarray(inner, dtype=np.float64)
    return (
        (i[..., 0] >= o[..., 0] - tol)
        & (i[..., 1] >= o[..., 1] - tol)
        & (i[..., 2] <= o[..., 2] + tol)
        & (i[..., 3] <= o[..., 3] + tol)
    )


def closest_objects(boxes, gts) -> np.ndarray:
    """Index of the closest ground truth for every box, or -1 when ``gts`` is empty.

    Closest means highest IoU. A box that overlaps no ground truth falls back to
    the nearest center (Euclidean). ``argmax``/``argmin`` return the first
    extremum, so ties go to the lowest index.
    """
    b = as_boxes(boxes)
    if len(gts) == 0:
        return np.full(len(b), -1, dtype=np.int64)
    g = as_boxes(gts)
    ious = iou_matrix(b, g)
    best = ious.argmax(axis=1)
    no_overlap = ious[np.arange(len(b)), best] <= 0.0
    if no_overlap.any():
        d = centers(b[no_overlap])[:, None, :] - centers(g)[None, :, :]
        best[no_overlap] = np.einsum("nkd,nkd->nk", d, d).argmin(axis=1)
    return best


def closest_object(box, gts) -> int | None:
    idx = int(closest_objects(box, gts)[0])
    return None if idx < 0 else idx


def paired_iou(a, b) -> np.ndarray:
    """Row-wise IoU of two equally long box batches."""
    a = as_boxes(a)
    b = as_boxes(b)
    inter = area(intersect(a, b))
    union = area(a) + area(b) - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out
