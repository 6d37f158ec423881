"""Seeded synthetic scenes: painted rectangles on a noisy feature grid."""
from __future__ import annotations

from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .geometry import ImageExtent, iou_matrix

MAX_REJECTIONS = 1000


@dataclass(frozen=True)
class SceneSpec:
    """Distribution of synthetic scenes.

    Object sizes are drawn log-uniformly between ``min_object`` pixels and
    ``max_object_frac`` of the image side, then stretched by an aspect factor
    ``2**(+-u)`` with ``u`` uniform in ``aspect_jitter``.
    """

    width_range: tuple = (128, 192)
    height_range: tuple = (128, 192)
    object_count_range: tuple = (1, 8)
    min_object: float = 8.0
    max_object_frac: float = 0.6
    n_categories: int = 12
    n_channels: int = 8
    noise: float = 0.3
    aspect_jitter: tuple = (0.2, 1.0)
    max_pair_iou: float = 0.7
    seed: int = 0

    def __post_init__(self):
        for name in ("width_range", "height_range", "object_count_range", "aspect_jitter"):
            lo, hi = getattr(self, name)
            object.__setattr__(self, name, (lo, hi))
            if lo > hi:
                raise ValueError(f"{name} must be ordered, got {(lo, hi)}")
        if self.width_range[0] < 1 or self.height_range[0] < 1:
            raise ValueError("image dimensions must be positive")
        if self.object_count_range[0] < 0:
            raise ValueError("object counts must be non-negative")
        if self.min_object < 4:
            raise ValueError("objects must be at least 4 px on each side")
        if self.n_categories < 1 or self.n_channels < 1:
            raise ValueError("need at least one category and one channel")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


@dataclass
class SyntheticScene:
    """A desk-scale image stand-in.

    ``features`` has shape ``(height, width, C)`` with one cell per pixel;
    ``gts`` is ``(K, 4)`` and ``categories`` ``(K,)``.
    """

    extent: ImageExtent
    features: np.ndarray
    gts: np.ndarray
    categories: np.ndarray
    image_id: int = 0
    _integral: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def integral(self) -> np.ndarray:
        """Summed-area table of shape ``(H+1, W+1, C)``."""
        if self._integral is None:
            f = self.features
            sat = np.zeros((f.shape[0] + 1, f.shape[1] + 1, f.shape[2]))
            sat[1:, 1:] = f.cumsum(axis=0).cumsum(axis=1)
            self._integral = sat
        return self._integral


def category_embeddings(spec: SceneSpec) -> np.ndarray:
    """Fixed per-category feature vectors; channel 0 is a shared presence cue."""
    rng = np.random.default_rng([spec.seed, 0xE3B])
    emb = rng.normal(0.0, 1.0, size=(spec.n_categories, spec.n_channels))
    emb[:, 0] = 1.0
    return emb


def _sample_box(rng, W: int, H: int, spec: SceneSpec) -> np.ndarray:
    lo = spec.min_object
    hi = max(lo, spec.max_object_frac * min(W, H))
    size = np.exp(rng.uniform(np.log(lo), np.log(hi)))
    u = rng.uniform(*spec.aspect_jitter) * rng.choice([-1.0, 1.0])
    aspect = 2.0 ** u
    w = np.clip(round(size * np.sqrt(aspect)), lo, max(lo, spec.max_object_frac * W))
    h = np.clip(round(size / np.sqrt(aspect)), lo, max(lo, spec.max_object_frac * H))
    w, h = int(min(w, W)), int(min(h, H))
    x = int(rng.integers(0, W - w + 1))
    y = int(rng.integers(0, H - h + 1))
    return np.array([x, y, x + w, y + h], dtype=np.float64)


def generate_scene(spec: SceneSpec, index: int) -> SyntheticScene:
    """Deterministic scene number ``index`` of the family described by ``spec``.

    Objects are placed by rejection sampling so that no two ground truths
    overlap above ``spec.max_pair_iou``; a placement that keeps failing is
    dropped, so the scene may hold fewer objects than drawn.
    """
    rng = np.random.default_rng([spec.seed, index])
    W = int(rng.integers(spec.width_range[0], spec.width_range[1] + 1))
    H = int(rng.integers(spec.height_range[0], spec.height_range[1] + 1))
    n_obj = int(rng.integers(spec.object_count_range[0], spec.object_count_range[1] + 1))

    boxes = []
    for _ in range(n_obj):
        for _ in range(MAX_REJECTIONS):
            b = _sample_box(rng, W, H, spec)
            if not boxes or iou_matrix(b, np.array(boxes)).max() <= spec.max_pair_iou:
                boxes.append(b)
                break
    gts = np.array(boxes).reshape(-1, 4)
    cats = rng.integers(0, spec.n_categories, size=len(gts))

    emb = category_embeddings(spec)
    feats = rng.normal(0.0, spec.noise, size=(H, W, spec.n_channels))
    for (x1, y1, x2, y2), c in zip(gts.astype(int), cats):
        feats[y1:y2, x1:x2] = emb[c] + rng.normal(0.0, spec.noise, size=(y2 - y1, x2 - x1, spec.n_channels))

    return SyntheticScene(ImageExtent(W, H), feats, gts, cats.astype(np.int64), image_id=index)


def generate_scenes(spec: SceneSpec, count: int, start: int = 0) -> list[SyntheticScene]:
    return [generate_scene(spec, i) for i in range(start, start + count)]


class SceneSet(Sequence):
    """Read-only, lazily generated run of scenes ``start .. start+count-1``.

    Scenes are rebuilt on access (a small cache keeps recent ones), so large
    training sets do not have to sit in memory.
    """

    def __init__(self, spec: SceneSpec, count: int, start: int = 0, cache_size: int = 16):
        if count < 0:
            raise ValueError("scene count must be non-negative")
        self.spec = spec
        self.count = count
        self.start = start
        self._get = lru_cache(maxsize=cache_size)(lambda i: generate_scene(spec, i))

    def __len__(self) -> int:
        return self.count

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self.count))]
        if not -self.count <= i < self.count:
            raise IndexError(i)
        return self._get(self.start + i % self.count)
