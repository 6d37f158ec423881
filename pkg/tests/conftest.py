import numpy as np
import pytest

from activeprop.geometry import ImageExtent
from activeprop.scenes import SyntheticScene


def make_scene(gts, width=100, height=100, channels=2, image_id=0, seed=0):
    """Scene with hand-placed ground truths on a small noisy grid."""
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    rng = np.random.default_rng(seed)
    feats = rng.normal(0.0, 0.1, size=(height, width, channels))
    for x1, y1, x2, y2 in gts.astype(int):
        feats[y1:y2, x1:x2, 0] += 1.0
    return SyntheticScene(ImageExtent(width, height), feats, gts, np.zeros(len(gts), np.int64), image_id)


@pytest.fixture
def scene_factory():
    return make_scene


ACCEPTANCE_LINES = []


def report(criterion: int, passed: bool, detail: str) -> None:
    """Record one acceptance verdict; printed again in the terminal summary."""
    line = f"ACCEPTANCE {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
