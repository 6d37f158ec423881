"""In-out probability vectors over a search region and their ML box decoding.

A search region is cut into ``M`` equal columns and ``M`` equal rows. The
localization output is one probability per column (``px``) and per row
(``py``) that the element lies inside the target box. Decoding picks, per
axis, the contiguous run of elements maximizing the factorized Bernoulli
likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import as_boxes

EPS = 1e-6
# relative slack under which two run scores count as tied
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class ProbVectors:
    px: np.ndarray
    py: np.ndarray
    region: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.px, dtype=np.float64)
        py = np.asarray(self.py, dtype=np.float64)
        region = np.asarray(self.region, dtype=np.float64).reshape(4)
        if px.ndim != 1 or px.shape != py.shape or px.size == 0:
            raise ValueError("px and py must be nonempty vectors of equal length")
        if np.any((px < 0) | (px > 1) | (py < 0) | (py > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if not (region[2] > region[0] and region[3] > region[1]):
            raise ValueError("search region must have positive area")
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "py", py)
        object.__setattr__(self, "region", region)

    @property
    def M(self) -> int:
        return self.px.size


@dataclass(frozen=True)
class TargetVectors:
    tx: np.ndarray
    ty: np.ndarray


def cell_centers(lo, hi, M: int) -> np.ndarray:
    """Centers of ``M`` equal cells spanning ``[lo, hi]``; broadcasts over leading dims."""
    lo = np.asarray(lo, dtype=np.float64)[..., None]
    hi = np.asarray(hi, dtype=np.float64)[..., None]
    frac = (np.arange(M) + 0.5) / M
    return lo + (hi - lo) * frac


def target_indicators(regions, targets, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Batched target vectors: ``(N, M)`` float arrays of 0/1 for x and y.

    Element ``i`` is 1 when its cell center lies within the target's extent
    along that axis. A target disjoint from its region yields all zeros on
    both axes.
    """
    r = as_boxes(regions)
    t = as_boxes(targets)
    cx = cell_centers(r[:, 0], r[:, 2], M)
    cy = cell_centers(r[:, 1], r[:, 3], M)
    tx = (cx >= t[:, 0:1]) & (cx <= t[:, 2:3])
    ty = (cy >= t[:, 1:2]) & (cy <= t[:, 3:4])
    # no overlap on one axis means the target is outside the region entirely
    hit = tx.any(axis=1) & ty.any(axis=1)
    tx &= hit[:, None]
    ty &= hit[:, None]
    return tx.astype(np.float64), ty.astype(np.float64)


def make_targets(region, target, M: int) -> TargetVectors:
    if M < 1:
        raise ValueError("M must be at least 1")
    tx, ty = target_indicators(region, target, M)
    return TargetVectors(tx[0], ty[0])


def targets_as_probs(t: np.ndarray, eps: float = EPS) -> np.ndarray:
    """Map 0/1 targets to ``eps`` / ``1 - eps`` probabilities."""
    return np.where(np.asarray(t) > 0.5, 1.0 - eps, eps)


def _pick_first_max(scores: np.ndarray) -> np.ndarray:
    """Index of the first entry (last axis) within the tie slack of the row max."""
    best = np.max(scores, axis=-1, keepdims=True)
    return np.argmax(scores >= best - _slack(best), axis=-1)


def _slack(best):
    return TIE_RTOL * np.maximum(1.0, np.abs(best))


def best_runs(p, eps: float = EPS) -> tuple[np.ndarray, np.ndarray]:
    """Most likely contiguous in-run for each row of ``p`` (shape ``(N, M)``).

    Returns 0-based inclusive ``(l, r)`` arrays. With ``P`` the prefix sums of
    per-element log-odds, a run scores ``P[r+1] - P[l]``; the best score for a
    fixed ``l`` is a suffix maximum, so each row costs O(M). Among runs within
    the tie slack of the optimum the lexicographically smallest ``(l, r)`` wins.
    """
    p = np.clip(np.atleast_2d(np.asarray(p, dtype=np.float64)), eps, 1.0 - eps)
    n, M = p.shape
    gain = np.log(p) - np.log1p(-p)
    prefix = np.concatenate([np.zeros((n, 1)), np.cumsum(gain, axis=1)], axis=1)
    ends = prefix[:, 1:]
    suffix_max = np.maximum.accumulate(ends[:, ::-1], axis=1)[:, ::-1]
    per_l = suffix_max - prefix[:, :-1]
    best = per_l.max(axis=1, keepdims=True)
    floor = best - _slack(best)
    ls = np.argmax(per_l >= floor, axis=1)
    rows = np.arange(n)
    scores = ends - prefix[rows, ls][:, None]
    ok = (scores >= floor) & (np.arange(M)[None, :] >= ls[:, None])
    rs = np.argmax(ok, axis=1)
    return ls, rs


def runs_to_boxes(regions, lx, rx, ly, ry, M: int) -> np.ndarray:
    """Map 0-based inclusive column/row runs to the outer edges of those cells."""
    reg = as_boxes(regions)
    cw = (reg[:, 2] - reg[:, 0]) / M
    ch = (reg[:, 3] - reg[:, 1]) / M
    x1 = reg[:, 0] + lx * cw
    x2 = np.where(rx + 1 == M, reg[:, 2], reg[:, 0] + (rx + 1) * cw)
    y1 = reg[:, 1] + ly * ch
    y2 = np.where(ry + 1 == M, reg[:, 3], reg[:, 1] + (ry + 1) * ch)
    return np.stack([x1, y1, x2, y2], axis=1)


def decode_batch(px, py, regions, eps: float = EPS) -> np.ndarray:
    """Maximum-likelihood boxes for a batch of in-out vectors; returns ``(N, 4)``."""
    px = np.atleast_2d(px)
    py = np.atleast_2d(py)
    lx, rx = best_runs(px, eps)
    ly, ry = best_runs(py, eps)
    return runs_to_boxes(regions, lx, rx, ly, ry, px.shape[1])


def decode_ml(p: ProbVectors, eps: float = EPS) -> np.ndarray:
    return decode_batch(p.px, p.py, p.region, eps)[0]


def _exhaustive_run(p: np.ndarray, eps: float, scale: float = 1.0) -> tuple[int, int]:
    q = np.clip(p, eps, 1.0 - eps)
    log_in = np.log(q) * scale
    log_out = np.log(1.0 - q) * scale
    M = len(q)
    runs = [(l, r) for l in range(M) for r in range(l, M)]
    scores = np.array([
        log_in[l:r + 1].sum() + log_out[:l].sum() + log_out[r + 1:].sum() for l, r in runs
    ])
    return runs[int(_pick_first_max(scores))]


def decode_exhaustive(p: ProbVectors, eps: float = EPS, scale: float = 1.0) -> np.ndarray:
    """Brute-force decoder: scores every run by its full log-likelihood.

    Test oracle for :func:`decode_ml`; ``scale`` multiplies every log term
    (argmax must not change for positive scales).
    """
    lx, rx = _exhaustive_run(p.px, eps, scale)
    ly, ry = _exhaustive_run(p.py, eps, scale)
    return runs_to_boxes(p.region, np.array([lx]), np.array([rx]), np.array([ly]), np.array([ry]), p.M)[0]
