"""scikit-learn style wrapper around the proposal engine.

``X`` is a sequence of scenes (objects with ``extent``, ``features``,
``gts`` and ``image_id``). ``fit`` trains the tiny model when the learned
backend is selected and is a no-op otherwise; ``predict`` returns one
``(boxes, scores)`` pair per scene; ``score`` is AR@100.
"""
from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .backends import TinyModelParams, make_backend
from .metrics import average_recall
from .nms import NmsSchedule
from .search import EngineConfig, propose
from .seeds import SeedConfig
from .training import TrainConfig, train

BACKENDS = ("oracle", "noisy", "learned")


def check_boxes(boxes, name: str = "boxes") -> np.ndarray:
    """Validate an ``(N, 4)`` array of finite, non-inverted boxes."""
    arr = np.asarray(boxes, dtype=np.float64)
    if arr.size == 0:
        return arr.reshape(0, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"{name} must have shape (N, 4), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr[:, 2] < arr[:, 0]) or np.any(arr[:, 3] < arr[:, 1]):
        raise ValueError(f"{name} has boxes with x2 < x1 or y2 < y1")
    return arr


def check_scenes(X) -> list:
    """Validate a non-empty sequence of scenes with consistent channel counts."""
    scenes = X if isinstance(X, Sequence) else list(X)
    if len(scenes) == 0:
        raise ValueError("expected at least one scene")
    channels = set()
    for i, s in enumerate(scenes):
        for attr in ("extent", "features", "gts"):
            if not hasattr(s, attr):
                raise TypeError(f"scene {i} lacks attribute {attr!r}")
        f = np.asarray(s.features)
        if f.ndim != 3:
            raise ValueError(f"scene {i}: features must be (H, W, C), got {f.shape}")
        channels.add(f.shape[2])
        check_boxes(s.gts, f"scene {i} gts")
    if len(channels) > 1:
        raise ValueError(f"scenes disagree on channel count: {sorted(channels)}")
    return scenes


class ActiveBoxProposer(BaseEstimator):
    """Class-agnostic box proposals by iterative attend-and-refine search.

    Parameters
    ----------
    backend : {"oracle", "noisy", "learned"}
    gamma, M, T, keep_after_first, early_stop_iou : search settings
    seed_count : target number of seed boxes per image
    noise : replacement probability for the noisy backend
    n_iter, learning_rate : tiny-model training settings (learned backend)
    random_state : single seed for every random draw
    """

    def __init__(self, backend="oracle", gamma=1.8, M=56, T=5, keep_after_first=200,
                 seed_count=1000, early_stop_iou=None, noise=0.2, n_iter=5000,
                 learning_rate=0.01, random_state=0):
        self.backend = backend
        self.gamma = gamma
        self.M = M
        self.T = T
        self.keep_after_first = keep_after_first
        self.seed_count = seed_count
        self.early_stop_iou = early_stop_iou
        self.noise = noise
        self.n_iter = n_iter
        self.learning_rate = learning_rate
        self.random_state = random_state

    def _engine_config(self) -> EngineConfig:
        return EngineConfig(
            gamma=self.gamma, M=self.M, T=self.T, keep_after_first=self.keep_after_first,
            seed_cfg=SeedConfig(target_count=self.seed_count), early_stop_iou=self.early_stop_iou,
            schedule=NmsSchedule(), seed=self.random_state,
        )

    def fit(self, X, y=None):
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        self.config_ = self._engine_config()
        params = None
        if self.backend == "learned":
            scenes = check_scenes(X)
            cfg = TrainConfig(iterations=self.n_iter, lr=self.learning_rate, gamma=self.gamma,
                              M=self.M, seed=self.random_state)
            params, self.loss_curve_ = train(scenes, cfg)
        self.params_: TinyModelParams | None = params
        self.backend_ = make_backend(self.backend, params, self.noise, self.random_state)
        return self

    def predict(self, X) -> list[tuple[np.ndarray, np.ndarray]]:
        if not hasattr(self, "backend_"):
            raise NotFittedError("call fit before predict")
        return [propose(s, self.backend_, self.config_) for s in check_scenes(X)]

    def score(self, X, y=None, K: int = 100) -> float:
        """AR@K against ``y`` (per-scene gt arrays) or the scenes' own gts."""
        scenes = check_scenes(X)
        gts = [s.gts for s in scenes] if y is None else [check_boxes(g) for g in y]
        return average_recall([b for b, _ in self.predict(scenes)], gts, K)
