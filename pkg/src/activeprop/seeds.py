"""Uniform seed-box grids that initialize the active search."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ImageExtent

DEFAULT_ASPECT_RATIOS = (0.5, 2.0, 1.0)
DEFAULT_MIN_DIMS = (16, 32, 50, 72, 96, 128, 192, 256, 384)


@dataclass(frozen=True)
class SeedConfig:
    """Seed grid layout.

    ``aspect_ratios`` are width/height ratios; ``min_dims`` are the length of
    the shorter box side for each size class.
    """

    aspect_ratios: tuple = DEFAULT_ASPECT_RATIOS
    min_dims: tuple = DEFAULT_MIN_DIMS
    target_count: int = 10000

    def __post_init__(self):
        object.__setattr__(self, "aspect_ratios", tuple(float(r) for r in self.aspect_ratios))
        object.__setattr__(self, "min_dims", tuple(float(d) for d in self.min_dims))
        if not self.aspect_ratios or min(self.aspect_ratios) <= 0:
            raise ValueError("aspect ratios must be positive")
        if not self.min_dims or min(self.min_dims) <= 0:
            raise ValueError("seed sizes must be positive")
        if self.target_count <= 0:
            raise ValueError("target_count must be positive")

    def shapes(self):
        """(width, height) for every (ratio, size) configuration, ratio-major."""
        return [
            (d * r, d) if r >= 1 else (d, d / r) for r in self.aspect_ratios for d in self.min_dims
        ]


def _axis_count(span: float, n: int) -> int:
    # at most one placement per pixel of feasible span
    return max(1, min(n, int(math.floor(span)) + 1))


def _split_budget(total: int, capacities: list[int]) -> list[int]:
    """Even split of ``total`` with per-configuration capacities (water filling)."""
    budgets = [0] * len(capacities)
    open_ = list(range(len(capacities)))
    remaining = total
    while open_ and remaining > 0:
        share = remaining / len(open_)
        full = [i for i in open_ if capacities[i] <= share]
        if not full:
            for i in open_:
                budgets[i] = max(1, round(share))
            break
        for i in full:
            budgets[i] = capacities[i]
            remaining -= capacities[i]
        open_ = [i for i in open_ if i not in full]
    return [max(1, b) for b in budgets]


def _grid_shape(budget: int, span_x: float, span_y: float, aspect: float) -> tuple[int, int]:
    """Pick (nx, ny) with nx/ny close to ``aspect`` and nx*ny close to ``budget``.

    Candidate row counts bracket the ideal ``sqrt(budget / aspect)``; when a
    span caps one axis the other absorbs the remaining budget.
    """
    max_nx = _axis_count(span_x, budget)
    max_ny = _axis_count(span_y, budget)
    ideal_ny = max(math.sqrt(budget / aspect), budget / max_nx)
    best = None
    for ny in sorted({min(max_ny, max(1, c)) for c in (math.floor(ideal_ny), math.ceil(ideal_ny))}):
        nx = min(max_nx, max(1, round(budget / ny)))
        key = (abs(nx * ny - budget), abs(math.log(nx / ny) - math.log(aspect)))
        if best is None or key < best[0]:
            best = (key, nx, ny)
    return best[1], best[2]


def generate_seeds(extent: ImageExtent, cfg: SeedConfig = SeedConfig()) -> np.ndarray:
    """Lay out seed boxes on per-configuration uniform grids.

    The seed budget is split evenly over the (ratio, size) configurations that
    fit inside the image; each configuration is tiled on a grid whose corners
    touch the image borders. Output is ``(N, 4)`` ordered by configuration,
    then row-major.
    """
    W, H = float(extent.width), float(extent.height)
    fitting = [(w, h) for w, h in cfg.shapes() if w <= W and h <= H]
    if not fitting:
        return np.zeros((0, 4))

    n = cfg.target_count
    capacities = [_axis_count(W - w, n) * _axis_count(H - h, n) for w, h in fitting]
    budgets = _split_budget(n, capacities)
    grids = [_grid_shape(b, W - w, H - h, W / H) for b, (w, h) in zip(budgets, fitting)]

    cap = math.ceil(1.05 * cfg.target_count)
    while sum(nx * ny for nx, ny in grids) > cap:
        # trim the largest grid along its longer axis
        i = max(range(len(grids)), key=lambda k: (grids[k][0] * grids[k][1], -k))
        nx, ny = grids[i]
        if nx == 1 and ny == 1:
            break
        grids[i] = (nx - 1, ny) if nx >= ny else (nx, ny - 1)

    out = []
    for (w, h), (nx, ny) in zip(fitting, grids):
        xs = np.linspace(0.0, W - w, nx) if nx > 1 else np.zeros(1)
        ys = np.linspace(0.0, H - h, ny) if ny > 1 else np.zeros(1)
        yy, xx = np.meshgrid(ys, xs, indexing="ij")
        x1 = xx.ravel()
        y1 = yy.ravel()
        out.append(np.stack([x1, y1, x1 + w, y1 + h], axis=1))
    return np.concatenate(out, axis=0)
