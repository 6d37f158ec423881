"""Multi-task loss and SGD training of the tiny in-out model."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .backends import OBJ_BLOCKS, TinyModelParams, n_params, pool_region, sigmoid
from .inout import EPS, target_indicators
from .seeds import SeedConfig
from .triplets import TrainingTriplets, build_pool, label_pool

log = logging.getLogger(__name__)


@dataclass
class Batch:
    """Pooled descriptors for one mini-batch.

    Localization: ``cols``/``rows`` ``(L, M, C)`` with targets ``tx``/``ty``
    ``(L, M)``. Objectness: ``obj`` ``(O, OBJ_BLOCKS * C)`` with labels ``y`` ``(O,)``.
    """

    cols: np.ndarray
    rows: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    obj: np.ndarray
    y: np.ndarray

    @classmethod
    def concat(cls, parts: list["Batch"]) -> "Batch":
        return cls(*(np.concatenate([getattr(p, f) for p in parts]) for f in
                     ("cols", "rows", "tx", "ty", "obj", "y")))


def make_batch(scene, loc_boxes, loc_gts, obj_boxes, obj_labels, gamma: float, M: int) -> Batch:
    C = scene.features.shape[2]
    if len(loc_boxes):
        regions, cols, rows, _ = pool_region(scene, loc_boxes, gamma, M)
        tx, ty = target_indicators(regions, loc_gts, M)
    else:
        cols = rows = np.zeros((0, M, C))
        tx = ty = np.zeros((0, M))
    if len(obj_boxes):
        obj = pool_region(scene, obj_boxes, gamma, M)[3]
    else:
        obj = np.zeros((0, OBJ_BLOCKS * C))
    return Batch(cols, rows, tx, ty, obj, np.asarray(obj_labels, dtype=np.float64))


def _bce(z, t):
    """Clamped binary cross-entropy and its derivative w.r.t. the logit."""
    p = sigmoid(z)
    q = np.clip(p, EPS, 1.0 - EPS)
    loss = -(t * np.log(q) + (1.0 - t) * np.log(1.0 - q))
    dz = np.where((p > EPS) & (p < 1.0 - EPS), p - t, 0.0)
    return loss, dz


def loss_and_grad(params: TinyModelParams, batch: Batch) -> tuple[float, np.ndarray]:
    """Localization loss (mean over the 2M in-out elements and over triplets)
    plus mean objectness loss, with the gradient packed like
    :meth:`TinyModelParams.to_vector`."""
    L = len(batch.tx)
    O = len(batch.y)
    if L == 0 and O == 0:
        raise ValueError("batch holds no localization and no objectness triplets")
    C = params.C
    grad = np.zeros(n_params(C))
    loss = 0.0

    if L:
        M = batch.tx.shape[1]
        scale = 1.0 / (2 * M * L)
        lx, dzx = _bce(batch.cols @ params.wx + params.bx, batch.tx)
        ly, dzy = _bce(batch.rows @ params.wy + params.by, batch.ty)
        loss += (lx.sum() + ly.sum()) * scale
        grad[:C] = np.einsum("lm,lmc->c", dzx, batch.cols) * scale
        grad[C] = dzx.sum() * scale
        grad[C + 1:2 * C + 1] = np.einsum("lm,lmc->c", dzy, batch.rows) * scale
        grad[2 * C + 1] = dzy.sum() * scale
    if O:
        lo, dzo = _bce(batch.obj @ params.wo + params.bo, batch.y)
        loss += lo.mean()
        grad[2 * C + 2:-1] = batch.obj.T @ dzo / O
        grad[-1] = dzo.sum() / O
    return float(loss), grad


@dataclass
class TrainConfig:
    iterations: int = 5000
    lr: float = 0.01
    lr_step: int = 4000
    lr_decay: float = 0.1
    momentum: float = 0.9
    batch_scenes: int = 4
    objectness_per_scene: int = 64
    positive_fraction: float = 0.5
    localization_per_scene: int = 32
    gamma: float = 1.8
    M: int = 56
    pool_seeds: SeedConfig = field(default_factory=lambda: SeedConfig(target_count=500))
    max_per_kind: int = 256
    seed: int = 0
    log_every: int = 500

    def lr_at(self, it: int) -> float:
        return self.lr * (self.lr_decay ** (it // self.lr_step)) if self.lr_step > 0 else self.lr

    def to_json(self) -> dict:
        d = asdict(self)
        d["pool_seeds"] = {k: list(v) if isinstance(v, tuple) else v for k, v in d["pool_seeds"].items()}
        return d

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown training config fields: {sorted(unknown)}")
        if "pool_seeds" in d:
            d["pool_seeds"] = SeedConfig(**d["pool_seeds"])
        return cls(**d)


def prepare_triplets(scenes, cfg: TrainConfig) -> list[TrainingTriplets]:
    out = []
    for scene in scenes:
        pool = build_pool(scene, cfg.pool_seeds, cfg.gamma, cfg.M, rng_seed=cfg.seed)
        out.append(label_pool(pool, scene, cfg.gamma, cfg.M, cfg.max_per_kind, rng_seed=cfg.seed))
    return out


def _take(rng, n_have: int, n_want: int) -> np.ndarray:
    if n_have == 0 or n_want == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(n_have, n_want, replace=n_have < n_want)


def sample_batch(rng, scenes, triplets, cfg: TrainConfig) -> Batch:
    """Image-centric mini-batch: a few scenes, then a fixed triplet quota from each."""
    picks = rng.choice(len(scenes), min(cfg.batch_scenes, len(scenes)), replace=False)
    parts = []
    for s in np.sort(picks):
        tr = triplets[s]
        pos = np.flatnonzero(tr.obj_labels == 1)
        neg = np.flatnonzero(tr.obj_labels == 0)
        n_pos = min(len(pos), round(cfg.objectness_per_scene * cfg.positive_fraction))
        n_neg = cfg.objectness_per_scene - n_pos if len(neg) else 0
        if not len(neg):
            n_pos = cfg.objectness_per_scene if len(pos) else 0
        obj_idx = np.concatenate([pos[_take(rng, len(pos), n_pos)], neg[_take(rng, len(neg), n_neg)]])
        loc_idx = _take(rng, len(tr.loc_boxes), cfg.localization_per_scene)
        parts.append(make_batch(scenes[s], tr.loc_boxes[loc_idx], tr.loc_gts[loc_idx],
                                tr.obj_boxes[obj_idx], tr.obj_labels[obj_idx], cfg.gamma, cfg.M))
    return Batch.concat(parts)


def train(scenes, cfg: TrainConfig = TrainConfig(), triplets=None,
          init: TinyModelParams | None = None) -> tuple[TinyModelParams, np.ndarray]:
    """SGD with momentum on the multi-task loss.

    Returns the final parameters and the per-iteration loss trace. Raises
    ``FloatingPointError`` if the loss stops being finite.
    """
    if len(scenes) == 0:
        raise ValueError("training needs at least one scene")
    C = scenes[0].features.shape[2]
    if triplets is None:
        triplets = prepare_triplets(scenes, cfg)
    params = init if init is not None else TinyModelParams.zeros(C, cfg.M)
    theta = params.to_vector()
    velocity = np.zeros_like(theta)
    rng = np.random.default_rng([cfg.seed, 0x7A1])
    losses = np.empty(cfg.iterations)

    for it in range(cfg.iterations):
        batch = sample_batch(rng, scenes, triplets, cfg)
        loss, grad = loss_and_grad(TinyModelParams.from_vector(theta, C, cfg.M), batch)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise FloatingPointError(f"training diverged at iteration {it} (lr={cfg.lr_at(it)}, loss={loss})")
        velocity = cfg.momentum * velocity + cfg.lr_at(it) * grad
        theta = theta - velocity
        losses[it] = loss
        if cfg.log_every and (it + 1) % cfg.log_every == 0:
            log.info("iter %d loss %.4f", it + 1, losses[max(0, it + 1 - cfg.log_every):it + 1].mean())
    return TinyModelParams.from_vector(theta, C, cfg.M), losses
