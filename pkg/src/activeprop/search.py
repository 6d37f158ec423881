"""Attend-refine-repeat: the active box search driver."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import ImageExtent, as_boxes, paired_iou
from .nms import NmsSchedule, greedy_nms, multithreshold_reorder, score_order
from .seeds import SeedConfig, generate_seeds


@dataclass(frozen=True)
class EngineConfig:
    """Tunables of the search.

    ``T`` counts the first pass over the seeds plus the repetitions over the
    ``keep_after_first`` best boxes. ``early_stop_iou`` (``None`` = off)
    freezes a box once its two latest refinements overlap above it.
    """

    gamma: float = 1.8
    M: int = 56
    T: int = 5
    keep_after_first: int = 2000
    seed_cfg: SeedConfig = field(default_factory=SeedConfig)
    early_stop_iou: float | None = None
    nms_iou: float = 0.95
    nms_keep: int = 2000
    schedule: NmsSchedule | None = field(default_factory=NmsSchedule)
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.keep_after_first < 1:
            raise ValueError("keep_after_first must be at least 1")
        if self.early_stop_iou is not None and not 0 < self.early_stop_iou <= 1:
            raise ValueError("early_stop_iou must lie in (0, 1]")
        if self.gamma < 1 or self.M < 1:
            raise ValueError("gamma must be >= 1 and M >= 1")

    @classmethod
    def toy(cls, **overrides) -> "EngineConfig":
        """Desk-scale preset for small synthetic scenes."""
        base = dict(seed_cfg=SeedConfig(target_count=1000), keep_after_first=200)
        base.update(overrides)
        return cls(**base)

    def to_json(self) -> dict:
        d = asdict(self)
        d["seed_cfg"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["seed_cfg"].items()}
        if self.schedule is not None:
            d["schedule"] = {"thresholds": list(self.schedule.thresholds), "counts": list(self.schedule.counts)}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "EngineConfig":
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown engine config fields: {sorted(unknown)}")
        if "seed_cfg" in d:
            d["seed_cfg"] = SeedConfig(**d["seed_cfg"])
        if d.get("schedule") is not None:
            d["schedule"] = NmsSchedule(**d["schedule"])
        return cls(**d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "EngineConfig":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class SearchTrace:
    """Candidates appended at each iteration plus bookkeeping.

    ``candidates[t]`` is ``(boxes, scores)`` for iteration ``t + 1``.
    """

    seeds: np.ndarray
    candidates: list = field(default_factory=list)
    n_evaluations: int = 0

    def pooled(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.candidates:
            return np.zeros((0, 4)), np.zeros(0)
        return (np.concatenate([b for b, _ in self.candidates]),
                np.concatenate([s for _, s in self.candidates]))


def _top(scores, k: int) -> np.ndarray:
    return score_order(scores)[:k]


def attend_refine_repeat(scene, backend, cfg: EngineConfig, seeds=None) -> SearchTrace:
    """Run the iterative search and collect every scored candidate.

    Iteration ``t`` scores the boxes of iteration ``t-1`` and refines them;
    the score is stored with the refined box. After the first pass only the
    ``keep_after_first`` best-scored boxes continue.
    """
    if seeds is None:
        seeds = generate_seeds(scene.extent, cfg.seed_cfg)
    work = as_boxes(seeds) if len(seeds) else np.zeros((0, 4))
    trace = SearchTrace(work)
    if len(work) == 0:
        return trace
    rng = np.random.default_rng([cfg.seed, getattr(scene, "image_id", 0)])
    scores = np.zeros(len(work))
    frozen = np.zeros(len(work), dtype=bool)

    for t in range(1, cfg.T + 1):
        active = ~frozen
        new_boxes = work.copy()
        new_scores = scores.copy()
        if active.any():
            res = backend.refine(scene, work[active], cfg.gamma, cfg.M, rng=rng)
            new_boxes[active] = res.decode()
            new_scores[active] = res.objectness
            trace.n_evaluations += int(active.sum())
        trace.candidates.append((new_boxes, new_scores))
        if cfg.early_stop_iou is not None and t >= 2:
            frozen = frozen | (active & (paired_iou(new_boxes, work) > cfg.early_stop_iou))
        work, scores = new_boxes, new_scores
        if t == 1:
            keep = _top(scores, cfg.keep_after_first)
            work, scores, frozen = work[keep], scores[keep], frozen[keep]
    return trace


def finalize(boxes, scores, cfg: EngineConfig) -> tuple[np.ndarray, np.ndarray]:
    """High-threshold NMS, truncation, then multi-threshold re-ordering."""
    if len(boxes) == 0:
        return np.zeros((0, 4)), np.zeros(0)
    scores = np.clip(scores, 0.0, 1.0)
    keep = greedy_nms(boxes, scores, cfg.nms_iou, max_keep=cfg.nms_keep)
    boxes, scores = boxes[keep], scores[keep]
    if cfg.schedule is None:
        return boxes, scores
    idx, new_scores, _ = multithreshold_reorder(boxes, scores, cfg.schedule)
    return boxes[idx], new_scores


def propose(scene, backend, cfg: EngineConfig = EngineConfig(), return_trace: bool = False):
    """Ranked proposals ``(boxes, scores)`` for one scene.

    With ``return_trace=True`` the :class:`SearchTrace` is returned as a
    third element.
    """
    trace = attend_refine_repeat(scene, backend, cfg)
    boxes, scores = finalize(*trace.pooled(), cfg)
    if return_trace:
        return boxes, scores, trace
    return boxes, scores


def propose_seeds_only(scene, backend, cfg: EngineConfig):
    """Score the seeds and rank the seeds themselves (no box refinement)."""
    seeds = generate_seeds(scene.extent, cfg.seed_cfg)
    if len(seeds) == 0:
        return np.zeros((0, 4)), np.zeros(0)
    res = backend.refine(scene, seeds, cfg.gamma, cfg.M, rng=np.random.default_rng(cfg.seed))
    return finalize(seeds, res.objectness, cfg)


def attended_budget(cfg: EngineConfig, n_seeds: int) -> int:
    """Backend evaluations of a full search without early stopping."""
    return n_seeds + (cfg.T - 1) * min(cfg.keep_after_first, n_seeds)


def attention_map(candidates, extent: ImageExtent, cell: int = 4) -> list[np.ndarray]:
    """Per-iteration heat maps of how many candidate boxes cover each cell.

    ``candidates`` is a list with one ``(N, 4)`` box array (or a ``(boxes,
    scores)`` pair) per iteration. A box covers a cell when it contains the
    cell center. Each map is scaled to a maximum of 1.
    """
    if cell < 1:
        raise ValueError("cell size must be at least 1 pixel")
    gw = math.ceil(extent.width / cell)
    gh = math.ceil(extent.height / cell)
    xs = (np.arange(gw) + 0.5) * cell
    ys = (np.arange(gh) + 0.5) * cell
    maps = []
    for item in candidates:
        boxes = item[0] if isinstance(item, tuple) else item
        boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
        inx = (xs[None, :] >= boxes[:, 0:1]) & (xs[None, :] <= boxes[:, 2:3])
        iny = (ys[None, :] >= boxes[:, 1:2]) & (ys[None, :] <= boxes[:, 3:4])
        counts = iny.astype(np.float64).T @ inx.astype(np.float64)
        peak = counts.max() if counts.size else 0.0
        maps.append(counts / peak if peak > 0 else counts)
    return maps
