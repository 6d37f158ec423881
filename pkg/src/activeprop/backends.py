"""Attend & refine backends.

A backend maps a scene and a batch of boxes to in-out probability vectors
over each box's search region plus an objectness probability per box. All
backends expose ``refine(scene, boxes, gamma, M, rng=None) -> RefineBatch``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import as_boxes, clip_boxes, closest_objects, enlarge, iou_matrix
from .inout import ProbVectors, decode_batch, target_indicators, targets_as_probs


@dataclass
class RefineBatch:
    px: np.ndarray
    py: np.ndarray
    regions: np.ndarray
    objectness: np.ndarray

    def __len__(self):
        return len(self.objectness)

    def decode(self) -> np.ndarray:
        return decode_batch(self.px, self.py, self.regions)

    def __getitem__(self, i) -> "RefineResult":
        return RefineResult(ProbVectors(self.px[i], self.py[i], self.regions[i]), float(self.objectness[i]))


@dataclass(frozen=True)
class RefineResult:
    probs: ProbVectors
    objectness: float


def oracle_targets(scene, boxes, gamma: float, M: int):
    """Search regions and 0/1 in-out targets toward each box's closest object."""
    boxes = as_boxes(boxes)
    regions = enlarge(boxes, gamma, scene.extent)
    idx = closest_objects(boxes, scene.gts)
    if idx.size and idx[0] >= 0:
        tx, ty = target_indicators(regions, scene.gts[idx], M)
    else:
        tx = np.zeros((len(boxes), M))
        ty = np.zeros((len(boxes), M))
    return regions, tx, ty


def max_iou(boxes, gts) -> np.ndarray:
    boxes = as_boxes(boxes)
    if len(gts) == 0:
        return np.zeros(len(boxes))
    return iou_matrix(boxes, gts).max(axis=1)


class OracleBackend:
    """Ideal refinement: in-out targets of the closest ground truth, max-IoU objectness."""

    def refine(self, scene, boxes, gamma: float, M: int, rng=None) -> RefineBatch:
        regions, tx, ty = oracle_targets(scene, boxes, gamma, M)
        return RefineBatch(targets_as_probs(tx), targets_as_probs(ty), regions, max_iou(boxes, scene.gts))


class NoisyOracleBackend(OracleBackend):
    """Oracle whose in-out elements are each replaced by Uniform[0, 1] with probability ``noise``."""

    def __init__(self, noise: float = 0.2, seed: int = 0):
        if not 0.0 <= noise <= 1.0:
            raise ValueError(f"noise must lie in [0, 1], got {noise}")
        self.noise = noise
        self.seed = seed

    def refine(self, scene, boxes, gamma: float, M: int, rng=None) -> RefineBatch:
        out = super().refine(scene, boxes, gamma, M)
        if rng is None:
            rng = np.random.default_rng(self.seed)
        for name in ("px", "py"):
            p = getattr(out, name)
            hit = rng.random(p.shape) < self.noise
            fresh = rng.random(p.shape)
            setattr(out, name, np.where(hit, fresh, p))
        return out


def oracle_refine(scene, box, gamma: float, M: int) -> RefineResult:
    return OracleBackend().refine(scene, box, gamma, M)[0]


def noisy_oracle_refine(scene, box, gamma: float, M: int, noise: float = 0.2, rng_seed: int = 0) -> RefineResult:
    return NoisyOracleBackend(noise, rng_seed).refine(scene, box, gamma, M)[0]


# ---------------------------------------------------------------------------
# pooling


def _sample_integral(sat: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinearly sample the summed-area table at points ``(xs, ys)``.

    The integral of a per-pixel constant image is bilinear inside each pixel,
    so this is exact for fractional coordinates.
    """
    Hp, Wp = sat.shape[0] - 1, sat.shape[1] - 1
    xs = np.clip(xs, 0.0, Wp)
    ys = np.clip(ys, 0.0, Hp)
    x0 = np.minimum(np.floor(xs).astype(np.int64), Wp - 1)
    y0 = np.minimum(np.floor(ys).astype(np.int64), Hp - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    return (
        sat[y0, x0] * (1 - fx) * (1 - fy)
        + sat[y0, x0 + 1] * fx * (1 - fy)
        + sat[y0 + 1, x0] * (1 - fx) * fy
        + sat[y0 + 1, x0 + 1] * fx * fy
    )


def rect_means(sat: np.ndarray, x1, y1, x2, y2) -> np.ndarray:
    """Mean feature over axis-aligned rectangles; inputs broadcast, output gains a channel axis."""
    total = (
        _sample_integral(sat, x2, y2)
        - _sample_integral(sat, x1, y2)
        - _sample_integral(sat, x2, y1)
        + _sample_integral(sat, x1, y1)
    )
    area = np.maximum((x2 - x1) * (y2 - y1), 1e-12)[..., None]
    return total / area


def _strip_means(sat, lo, hi, a1, a2, along_x: bool, M: int) -> np.ndarray:
    """Means of ``M`` equal strips splitting ``[lo, hi]``, each spanning ``[a1, a2]`` across."""
    e = lo + (hi - lo) * (np.arange(M + 1) / M)
    if along_x:
        band = _sample_integral(sat, e, a2) - _sample_integral(sat, e, a1)
    else:
        band = _sample_integral(sat, a2, e) - _sample_integral(sat, a1, e)
    area = ((hi - lo) / M * (a2 - a1))[..., None]
    return np.diff(band, axis=1) / np.maximum(area, 1e-12)


def _rect_sums(sat, boxes) -> tuple[np.ndarray, np.ndarray]:
    x1, y1, x2, y2 = boxes.T
    means = rect_means(sat, x1, y1, x2, y2)
    area = np.maximum((x2 - x1) * (y2 - y1), 0.0)
    return means * area[:, None], area


def _band_mean(outer_sum, outer_area, inner_sum, inner_area) -> np.ndarray:
    band = np.maximum(outer_area - inner_area, 1e-12)[:, None]
    return (outer_sum - inner_sum) / band


OBJ_BLOCKS = 4  # objectness descriptor width in units of C
EDGE_IN = 0.7  # inner edge band: the box minus its centered 0.7x core
EDGE_OUT = 1.3  # outer edge band: the 1.3x enlarged box minus the box


def _shrink(boxes, factor: float) -> np.ndarray:
    c = (boxes[:, :2] + boxes[:, 2:]) / 2
    half = (boxes[:, 2:] - boxes[:, :2]) * factor / 2
    return np.concatenate([c - half, c + half], axis=1)


def objectness_descriptor(scene, boxes, regions) -> np.ndarray:
    """``(N, 4C)`` means over the box, the region outside the box, a thin
    band inside the box edges and a thin band just outside them."""
    sat = scene.integral
    boxes = clip_boxes(boxes, scene.extent)
    box_sum, box_area = _rect_sums(sat, boxes)
    reg_sum, reg_area = _rect_sums(sat, regions)
    core_sum, core_area = _rect_sums(sat, _shrink(boxes, EDGE_IN))
    halo_sum, halo_area = _rect_sums(sat, enlarge(boxes, EDGE_OUT, scene.extent))
    inner = box_sum / np.maximum(box_area, 1e-12)[:, None]
    return np.concatenate([
        inner,
        _band_mean(reg_sum, reg_area, box_sum, box_area),
        _band_mean(box_sum, box_area, core_sum, core_area),
        _band_mean(halo_sum, halo_area, box_sum, box_area),
    ], axis=1)


def pool_region(scene, boxes, gamma: float, M: int):
    """Descriptors consumed by the tiny model.

    Returns ``(regions, cols, rows, obj)`` where ``cols``/``rows`` are
    ``(N, M, C)`` strip means over the search region and ``obj`` is the
    objectness descriptor of :func:`objectness_descriptor`.
    """
    boxes = as_boxes(boxes)
    regions = enlarge(boxes, gamma, scene.extent)
    sat = scene.integral
    rx1, ry1, rx2, ry2 = (regions[:, k:k + 1] for k in range(4))
    cols = _strip_means(sat, rx1, rx2, ry1, ry2, True, M)
    rows = _strip_means(sat, ry1, ry2, rx1, rx2, False, M)
    return regions, cols, rows, objectness_descriptor(scene, boxes, regions)


# ---------------------------------------------------------------------------
# tiny learned model


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def n_params(C: int) -> int:
    """Length of the packed parameter vector for ``C`` feature channels."""
    return 2 * C + 2 + OBJ_BLOCKS * C + 1


@dataclass
class TinyModelParams:
    """Linear heads over pooled descriptors.

    Column and row heads share one weight vector across all positions;
    the objectness head reads the ``OBJ_BLOCKS * C`` box descriptor.
    """

    wx: np.ndarray
    bx: float
    wy: np.ndarray
    by: float
    wo: np.ndarray
    bo: float
    M: int = 56

    @classmethod
    def zeros(cls, n_channels: int, M: int = 56) -> "TinyModelParams":
        return cls(np.zeros(n_channels), 0.0, np.zeros(n_channels), 0.0, np.zeros(OBJ_BLOCKS * n_channels), 0.0, M)

    @property
    def C(self) -> int:
        return len(self.wx)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.wx, [self.bx], self.wy, [self.by], self.wo, [self.bo]]).astype(np.float64)

    @classmethod
    def from_vector(cls, v: np.ndarray, n_channels: int, M: int = 56) -> "TinyModelParams":
        C = n_channels
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (n_params(C),):
            raise ValueError(f"parameter vector must have length {n_params(C)}")
        return cls(v[:C].copy(), float(v[C]), v[C + 1:2 * C + 1].copy(), float(v[2 * C + 1]),
                   v[2 * C + 2:-1].copy(), float(v[-1]), M)

    def to_json(self) -> dict:
        return {
            "version": 1, "M": int(self.M), "C": int(self.C),
            "wx": self.wx.tolist(), "bx": float(self.bx),
            "wy": self.wy.tolist(), "by": float(self.by),
            "wo": self.wo.tolist(), "bo": float(self.bo),
        }

    @classmethod
    def from_json(cls, d: dict) -> "TinyModelParams":
        if d.get("version") != 1:
            raise ValueError(f"unsupported model version {d.get('version')!r}")
        C = int(d["C"])
        p = cls(np.asarray(d["wx"], float), float(d["bx"]), np.asarray(d["wy"], float), float(d["by"]),
                np.asarray(d["wo"], float), float(d["bo"]), int(d["M"]))
        if p.wx.shape != (C,) or p.wy.shape != (C,) or p.wo.shape != (OBJ_BLOCKS * C,):
            raise ValueError("model weight shapes do not match C")
        if not np.all(np.isfinite(p.to_vector())):
            raise ValueError("model parameters must be finite")
        return p

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "TinyModelParams":
        return cls.from_json(json.loads(Path(path).read_text()))


def tiny_forward_batch(params: TinyModelParams, scene, boxes, gamma: float, M: int) -> RefineBatch:
    regions, cols, rows, obj = pool_region(scene, boxes, gamma, M)
    px = sigmoid(cols @ params.wx + params.bx)
    py = sigmoid(rows @ params.wy + params.by)
    po = sigmoid(obj @ params.wo + params.bo)
    return RefineBatch(px, py, regions, po)


def tiny_forward(params: TinyModelParams, scene, box, gamma: float, M: int) -> RefineResult:
    return tiny_forward_batch(params, scene, box, gamma, M)[0]


class LearnedBackend:
    def __init__(self, params: TinyModelParams):
        self.params = params

    def refine(self, scene, boxes, gamma: float, M: int, rng=None) -> RefineBatch:
        return tiny_forward_batch(self.params, scene, boxes, gamma, M)


def make_backend(name: str, params: TinyModelParams | None = None, noise: float = 0.2, seed: int = 0):
    if name == "oracle":
        return OracleBackend()
    if name == "noisy":
        return NoisyOracleBackend(noise, seed)
    if name == "learned":
        if params is None:
            raise ValueError("the learned backend needs model parameters")
        return LearnedBackend(params)
    raise ValueError(f"unknown backend {name!r}")
