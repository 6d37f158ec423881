"""Training pools and labeled triplets.

The pool imitates what the search sees at test time: seed boxes, two
generations of ideal refinement, and two generations of refinement with
jittered in-out vectors.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends import NoisyOracleBackend, OracleBackend, max_iou
from .geometry import as_boxes, closest_objects, enlarge
from .inout import target_indicators
from .seeds import SeedConfig, generate_seeds

POSITIVE_IOU = 0.5
NEGATIVE_IOU = 0.4
POOL_NOISE = 0.2


@dataclass
class TrainingTriplets:
    """Labeled boxes of one scene.

    ``loc_boxes`` pair with ``loc_gts``, the closest ground truth of each box;
    their in-out target vectors are built on demand by :meth:`loc_targets`.
    """

    loc_boxes: np.ndarray
    loc_gts: np.ndarray
    obj_boxes: np.ndarray
    obj_labels: np.ndarray

    @property
    def positives(self) -> np.ndarray:
        return self.obj_boxes[self.obj_labels == 1]

    @property
    def negatives(self) -> np.ndarray:
        return self.obj_boxes[self.obj_labels == 0]

    def loc_targets(self, gamma: float, M: int, extent=None, index=slice(None)):
        regions = enlarge(self.loc_boxes[index], gamma, extent)
        return target_indicators(regions, self.loc_gts[index], M)


def unique_rows(boxes: np.ndarray) -> np.ndarray:
    """Exact-coordinate deduplication keeping first occurrences in order."""
    if len(boxes) == 0:
        return boxes
    _, first = np.unique(boxes, axis=0, return_index=True)
    return boxes[np.sort(first)]


def build_pool(scene, seed_cfg: SeedConfig, gamma: float, M: int, rng_seed: int = 0) -> np.ndarray:
    seeds = generate_seeds(scene.extent, seed_cfg)
    if len(seeds) == 0:
        return seeds
    clean = OracleBackend()
    noisy = NoisyOracleBackend(POOL_NOISE)
    rng = np.random.default_rng([rng_seed, scene.image_id])

    c1 = clean.refine(scene, seeds, gamma, M).decode()
    c2 = clean.refine(scene, c1, gamma, M).decode()
    n1 = noisy.refine(scene, seeds, gamma, M, rng=rng).decode()
    n2 = noisy.refine(scene, n1, gamma, M, rng=rng).decode()
    return unique_rows(np.concatenate([seeds, c1, c2, n1, n2]))


def label_pool(pool, scene, gamma: float, M: int, max_per_kind: int | None = None,
               rng_seed: int = 0) -> TrainingTriplets:
    """Split ``pool`` into localization and objectness triplets.

    Objectness positives have max IoU >= 0.5 with a ground truth, negatives
    max IoU < 0.4, and the band in between is left out. Localization uses the
    positives. ``max_per_kind`` randomly subsamples each list to bound memory.
    """
    pool = as_boxes(pool)
    best = max_iou(pool, scene.gts)
    pos = best >= POSITIVE_IOU
    neg = best < NEGATIVE_IOU

    pos_idx = np.flatnonzero(pos)
    neg_idx = np.flatnonzero(neg)
    if max_per_kind is not None:
        rng = np.random.default_rng([rng_seed, scene.image_id, 7])
        if len(pos_idx) > max_per_kind:
            pos_idx = np.sort(rng.choice(pos_idx, max_per_kind, replace=False))
        if len(neg_idx) > max_per_kind:
            neg_idx = np.sort(rng.choice(neg_idx, max_per_kind, replace=False))

    loc_boxes = pool[pos_idx]
    if len(loc_boxes):
        loc_gts = scene.gts[closest_objects(loc_boxes, scene.gts)]
    else:
        loc_gts = np.zeros((0, 4))
    obj_idx = np.concatenate([pos_idx, neg_idx])
    labels = np.concatenate([np.ones(len(pos_idx), np.int64), np.zeros(len(neg_idx), np.int64)])
    order = np.argsort(obj_idx, kind="stable")
    return TrainingTriplets(loc_boxes, loc_gts, pool[obj_idx[order]], labels[order])
