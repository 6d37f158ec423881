"""Greedy non-maximum suppression and multi-threshold re-ordering."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import as_boxes, iou_matrix

DEFAULT_THRESHOLDS = (0.55, 0.60, 0.65, 0.75, 0.80, 0.85, 0.90, 0.95)
DEFAULT_COUNTS = (10, 20, 40, 100, 200, 400, 1000, 2000)


@dataclass(frozen=True)
class NmsSchedule:
    thresholds: tuple = DEFAULT_THRESHOLDS
    counts: tuple = DEFAULT_COUNTS

    def __post_init__(self):
        t = tuple(float(v) for v in self.thresholds)
        k = tuple(int(v) for v in self.counts)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "counts", k)
        if not t or len(t) != len(k):
            raise ValueError("schedule needs equally many thresholds and counts")
        if any(b <= a for a, b in zip(t, t[1:])) or any(b <= a for a, b in zip(k, k[1:])):
            raise ValueError("schedule thresholds and counts must be strictly ascending")
        if not (0 < t[0] and t[-1] <= 1) or k[0] < 1:
            raise ValueError("thresholds must lie in (0, 1] and counts be positive")

    def __len__(self):
        return len(self.thresholds)


def score_order(scores) -> np.ndarray:
    """Descending score order; equal scores keep insertion order."""
    return np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")


def greedy_nms(boxes, scores, iou_thresh: float, max_keep: int | None = None) -> np.ndarray:
    """Indices kept by greedy NMS, in selection order.

    A proposal is suppressed when its IoU with an already selected one is
    strictly above ``iou_thresh``. ``max_keep`` stops after that many
    selections; the result equals the prefix of the full run.
    """
    if not 0 < iou_thresh <= 1:
        raise ValueError(f"IoU threshold must lie in (0, 1], got {iou_thresh}")
    b = as_boxes(boxes) if len(boxes) else np.zeros((0, 4))
    order = score_order(scores)
    keep = []
    limit = len(order) if max_keep is None else max_keep
    while order.size and len(keep) < limit:
        i = order[0]
        keep.append(i)
        rest = order[1:]
        order = rest[iou_matrix(b[i], b[rest])[0] <= iou_thresh]
    return np.asarray(keep, dtype=np.int64)


def _nms_from_matrix(ious: np.ndarray, order: np.ndarray, thresh: float):
    """Greedy NMS over a precomputed IoU matrix; yields kept indices lazily."""
    alive = np.ones(len(order), dtype=bool)
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order))
    for rank, i in enumerate(order):
        if not alive[rank]:
            continue
        yield i
        alive[pos[ious[i] > thresh]] = False


def multithreshold_reorder(boxes, scores, sched: NmsSchedule = NmsSchedule()):
    """Tiered re-ranking so every prefix suits its own NMS threshold.

    NMS is run on the full input at each threshold ``t_i``. Tier ``i`` admits
    the best proposals of ``L(t_i)`` not yet admitted until the output holds
    ``K_i`` items; a tier that runs short passes its shortfall on. Admitted
    scores become ``o + (N - i)`` for 1-based tier ``i`` of ``N`` tiers.

    Returns ``(indices, new_scores, tiers)`` in output order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if np.any((scores < 0) | (scores > 1)):
        raise ValueError("multi-threshold reordering needs scores in [0, 1]")
    if len(scores) > sched.counts[-1]:
        raise ValueError(f"input holds {len(scores)} proposals, more than the last budget {sched.counts[-1]}")
    n_tiers = len(sched)
    if len(scores) == 0:
        return np.zeros(0, np.int64), np.zeros(0), np.zeros(0, np.int64)

    ious = iou_matrix(boxes, boxes)
    order = score_order(scores)
    taken = np.zeros(len(scores), dtype=bool)
    out, tiers = [], []
    for tier, (t, k) in enumerate(zip(sched.thresholds, sched.counts), start=1):
        need = k - len(out)
        if need <= 0:
            continue
        for i in _nms_from_matrix(ious, order, t):
            if need == 0:
                break
            if not taken[i]:
                taken[i] = True
                out.append(i)
                tiers.append(tier)
                need -= 1
    idx = np.asarray(out, dtype=np.int64)
    tiers = np.asarray(tiers, dtype=np.int64)
    return idx, scores[idx] + (n_tiers - tiers), tiers
