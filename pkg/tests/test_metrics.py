import csv
import json

import numpy as np
import pytest

from activeprop.geometry import iou
from activeprop.metrics import (AR_THRESHOLDS, average_recall, evaluate, match_counts, recall, recall_vs_iou_curve,
                                size_band, size_stratified_ar)

GT = np.array([[0.0, 0.0, 100.0, 100.0]])
# shifted box of the same size: IoU (100 - d) / (100 + d) = 0.725 for d = 2.75 / 1.725 * 10
SHIFT = 100 * (1 - 0.725) / (1 + 0.725)
AT_0725 = np.array([[SHIFT, 0.0, 100.0 + SHIFT, 100.0]])


def reference_matches(props, gts, t):
    """Plain-loop greedy matching in proposal order."""
    free = list(range(len(gts)))
    hit = 0
    for p in props:
        best, best_j = -1.0, None
        for j in free:
            v = iou(p, gts[j])
            if v >= t and v > best:
                best, best_j = v, j
        if best_j is not None:
            free.remove(best_j)
            hit += 1
    return hit


class TestRecall:
    def test_fixture_iou(self):
        assert iou(AT_0725[0], GT[0]) == pytest.approx(0.725)

    def test_threshold_sides(self):
        assert recall(AT_0725, GT, 0.70) == 1.0
        assert recall(AT_0725, GT, 0.75) == 0.0

    def test_exact_copies(self):
        gts = np.array([[0, 0, 10, 10], [20, 20, 40, 40]], dtype=float)
        for t in (0.5, 0.95, 1.0):
            assert recall(gts[::-1], gts, t) == 1.0

    def test_no_proposals(self):
        assert recall(np.zeros((0, 4)), GT, 0.5) == 0.0

    def test_no_gts(self):
        assert recall(GT, np.zeros((0, 4)), 0.5) == 1.0

    def test_one_proposal_one_gt(self):
        gts = np.array([[0, 0, 10, 10], [1, 0, 11, 10]], dtype=float)
        assert recall(np.array([[0, 0, 10.5, 10]]), gts, 0.5) == 0.5

    def test_random_against_reference(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            c = rng.uniform(0, 60, (12, 2))
            props = np.column_stack([c, c + rng.uniform(5, 30, (12, 2))])
            c = rng.uniform(0, 60, (4, 2))
            gts = np.column_stack([c, c + rng.uniform(5, 30, (4, 2))])
            for t in (0.3, 0.5, 0.7):
                assert match_counts(props, gts, [t])[0] == reference_matches(props, gts, t)


class TestAverageRecall:
    def test_fixture_is_half(self):
        assert average_recall(AT_0725, GT, 100) == 0.5

    def test_perfect(self):
        assert average_recall(GT, GT, 1) == 1.0

    def test_below_all_thresholds(self):
        d = 100 * (1 - 0.49) / 1.49
        assert average_recall(np.array([[d, 0, 100 + d, 100]]), GT, 10) == 0.0

    def test_top_k_cut(self):
        props = np.array([[500, 500, 510, 510], [0, 0, 100, 100]], dtype=float)
        assert average_recall(props, GT, 1) == 0.0
        assert average_recall(props, GT, 2) == 1.0

    def test_pooled_over_images(self):
        # image 1 has 3 gts all found, image 2 has one gt missed: 3 of 4
        g1 = np.array([[0, 0, 10, 10], [20, 20, 30, 30], [40, 40, 50, 50]], dtype=float)
        assert average_recall([g1, np.zeros((0, 4))], [g1, GT], 10) == pytest.approx(0.75)

    def test_thresholds(self):
        np.testing.assert_allclose(AR_THRESHOLDS, np.arange(10) * 0.05 + 0.5)

    def test_curve_monotone(self):
        rng = np.random.default_rng(1)
        props = GT + rng.normal(0, 8, (30, 4))
        curve = recall_vs_iou_curve(props, GT, 30, np.linspace(0.1, 1.0, 19))
        rs = [r for _, r in curve]
        assert all(b <= a for a, b in zip(rs, rs[1:]))


class TestSizeBands:
    def test_boundaries_are_medium(self):
        b = np.array([[0, 0, 32, 32], [0, 0, 96, 96], [0, 0, 31.9, 32], [0, 0, 96.1, 96]])
        assert size_band(b).tolist() == ["medium", "medium", "small", "large"]

    def test_vacuous_bands(self):
        gts = np.array([[0, 0, 200, 200], [300, 300, 450, 420]], dtype=float)
        out = size_stratified_ar(gts, gts, 100)
        assert out["large"] == (1.0, False)
        assert out["small"] == (1.0, True) and out["medium"] == (1.0, True)


class TestReport:
    def test_json_and_curves(self, tmp_path):
        rep = evaluate([AT_0725], [GT], ks=(1, 10))
        assert rep.ar_at == {1: 0.5, 10: 0.5}
        assert rep.vacuous_bands == ["small", "medium"]
        rep.write_json(tmp_path / "r.json")
        doc = json.loads((tmp_path / "r.json").read_text())
        assert doc["ar_at"]["10"] == 0.5 and doc["n_gts"] == 1
        rep.write_curves_csv(tmp_path / "c.csv")
        rows = list(csv.reader(open(tmp_path / "c.csv")))
        assert rows[0] == ["K", "iou", "recall"] and len(rows) == 1 + 2 * 10
