"""Average Recall evaluation of box proposals.

Per image, the top-K proposals (already in rank order) are matched to
ground truths greedily: each proposal, in order, claims the unmatched ground
truth it overlaps most, provided the IoU reaches the threshold. Dataset
recall pools matched and total ground-truth counts over all images.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import area, iou_matrix

AR_THRESHOLDS = np.round(np.arange(0.5, 0.951, 0.05), 2)
SMALL_MAX = 32 ** 2
LARGE_MIN = 96 ** 2


def match_counts(proposals, gts, thresholds) -> np.ndarray:
    """Number of ground truths recalled at each threshold (greedy matching)."""
    thresholds = np.atleast_1d(np.asarray(thresholds, dtype=np.float64))
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    proposals = np.asarray(proposals, dtype=np.float64).reshape(-1, 4)
    if len(gts) == 0 or len(proposals) == 0:
        return np.zeros(len(thresholds), dtype=np.int64)
    ious = iou_matrix(proposals, gts)
    counts = np.zeros(len(thresholds), dtype=np.int64)
    for k, t in enumerate(thresholds):
        free = np.ones(len(gts), dtype=bool)
        for row in ious[ious.max(axis=1) >= t]:
            cand = np.where(free & (row >= t), row, -1.0)
            j = int(np.argmax(cand))
            if cand[j] >= 0:
                free[j] = False
                counts[k] += 1
                if not free.any():
                    break
    return counts


def recall(proposals, gts, iou_thresh: float) -> float:
    """Fraction of ``gts`` recalled by ``proposals`` at one IoU threshold (1 when there are none)."""
    n = len(np.asarray(gts).reshape(-1, 4))
    if n == 0:
        return 1.0
    return float(match_counts(proposals, gts, [iou_thresh])[0]) / n


def _as_dataset(proposals, gts):
    """One image is given as arrays; a dataset as lists of per-image arrays."""
    if isinstance(gts, np.ndarray):
        return [np.asarray(proposals)], [np.asarray(gts)]
    return [np.asarray(p) for p in proposals], [np.asarray(g) for g in gts]


def recall_curve(proposals, gts, K: int, thresholds=AR_THRESHOLDS) -> np.ndarray:
    """Pooled recall at each threshold for the top-``K`` proposals of every image."""
    props, gt_list = _as_dataset(proposals, gts)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    hit = np.zeros(len(thresholds))
    total = 0
    for p, g in zip(props, gt_list):
        g = g.reshape(-1, 4)
        total += len(g)
        hit += match_counts(p.reshape(-1, 4)[:K], g, thresholds)
    if total == 0:
        return np.ones(len(thresholds))
    return hit / total


def average_recall(proposals, gts, K: int) -> float:
    """Recall averaged over IoU thresholds 0.50:0.05:0.95 using the top ``K`` proposals."""
    if K < 1:
        raise ValueError("K must be at least 1")
    return float(recall_curve(proposals, gts, K).mean())


def recall_vs_iou_curve(proposals, gts, K: int, thresholds) -> list[tuple[float, float]]:
    r = recall_curve(proposals, gts, K, thresholds)
    return [(float(t), float(v)) for t, v in zip(thresholds, r)]


def size_band(boxes) -> np.ndarray:
    """'small' / 'medium' / 'large' per box; both medium bounds are inclusive."""
    a = area(np.asarray(boxes, dtype=np.float64).reshape(-1, 4))
    return np.where(a < SMALL_MAX, "small", np.where(a > LARGE_MIN, "large", "medium"))


def size_stratified_ar(proposals, gts, K: int) -> dict:
    """AR@K restricted to ground truths in each area band.

    Returns ``{band: (value, vacuous)}``; a band without ground truths reports
    ``(1.0, True)``.
    """
    props, gt_list = _as_dataset(proposals, gts)
    out = {}
    for band in ("small", "medium", "large"):
        sub = [g.reshape(-1, 4)[size_band(g) == band] for g in gt_list]
        vacuous = sum(len(s) for s in sub) == 0
        out[band] = (1.0, True) if vacuous else (average_recall(props, sub, K), False)
    return out


@dataclass
class ArReport:
    ar_at: dict
    size_ar_at_100: dict
    vacuous_bands: list
    recall_curves: dict = field(default_factory=dict)
    n_images: int = 0
    n_gts: int = 0

    def to_json(self) -> dict:
        return {
            "n_images": self.n_images,
            "n_gts": self.n_gts,
            "ar_at": {str(k): v for k, v in self.ar_at.items()},
            "size_ar_at_100": self.size_ar_at_100,
            "vacuous_bands": self.vacuous_bands,
            "recall_curves": {str(k): [[t, r] for t, r in c] for k, c in self.recall_curves.items()},
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    def write_curves_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["K", "iou", "recall"])
            for k, curve in self.recall_curves.items():
                for t, r in curve:
                    w.writerow([k, f"{t:.2f}", repr(float(r))])


def evaluate(proposals, gts, ks=(10, 100, 1000), curve_thresholds=AR_THRESHOLDS) -> ArReport:
    """AR@K for each ``K``, size-banded AR@100, and recall-vs-IoU curves."""
    props, gt_list = _as_dataset(proposals, gts)
    sizes = size_stratified_ar(props, gt_list, 100)
    return ArReport(
        ar_at={int(k): average_recall(props, gt_list, int(k)) for k in ks},
        size_ar_at_100={b: v for b, (v, _) in sizes.items()},
        vacuous_bands=[b for b, (_, vac) in sizes.items() if vac],
        recall_curves={int(k): recall_vs_iou_curve(props, gt_list, int(k), curve_thresholds) for k in ks},
        n_images=len(gt_list),
        n_gts=int(sum(len(g.reshape(-1, 4)) for g in gt_list)),
    )
