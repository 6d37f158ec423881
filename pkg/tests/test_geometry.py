import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from activeprop.geometry import (ImageExtent, closest_object, closest_objects, contains, enlarge, iou,
                                 iou_matrix, paired_iou)

coord = st.floats(0, 100, allow_nan=False)


def random_boxes(rng, n, size):
    """``n`` valid boxes: two random corners sorted per coordinate."""
    return np.sort(rng.uniform(0, size, (n, 2, 2)), axis=1).reshape(n, 4)


@st.composite
def boxes(draw):
    x1, x2 = sorted((draw(coord), draw(coord)))
    y1, y2 = sorted((draw(coord), draw(coord)))
    return np.array([x1, y1, x2, y2])


class TestIoU:
    def test_identity(self):
        assert iou([0, 0, 10, 10], [0, 0, 10, 10]) == 1.0

    def test_disjoint(self):
        assert iou([0, 0, 10, 10], [20, 20, 30, 30]) == 0.0

    def test_half_overlap(self):
        # intersection 50, union 150
        assert iou([0, 0, 10, 10], [5, 0, 15, 10]) == pytest.approx(1 / 3)

    def test_zero_union_is_zero(self):
        assert iou([3, 3, 3, 3], [3, 3, 3, 3]) == 0.0

    def test_touching_edges(self):
        assert iou([0, 0, 10, 10], [10, 0, 20, 10]) == 0.0

    @given(boxes(), boxes())
    def test_symmetric_and_bounded(self, a, b):
        v = iou(a, b)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(iou(b, a), abs=1e-12)

    def test_matrix_matches_paired(self):
        rng = np.random.default_rng(0)
        a = random_boxes(rng, 30, 50)
        b = a[::-1].copy()
        np.testing.assert_allclose(np.diag(iou_matrix(a, b)), paired_iou(a, b), atol=1e-12)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            iou_matrix(np.zeros((2, 3)), np.zeros((1, 4)))


class TestEnlarge:
    def test_symmetric_scaling(self):
        np.testing.assert_allclose(enlarge([10, 10, 20, 20], 2, ImageExtent(100, 100)), [5, 5, 25, 25])

    def test_clipped_at_origin(self):
        np.testing.assert_allclose(enlarge([0, 0, 20, 20], 2, ImageExtent(100, 100)), [0, 0, 30, 30])

    def test_gamma_one_is_clip(self):
        np.testing.assert_allclose(enlarge([-5, 0, 20, 120], 1, ImageExtent(100, 100)), [0, 0, 20, 100])

    def test_gamma_below_one_rejected(self):
        with pytest.raises(ValueError):
            enlarge([0, 0, 1, 1], 0.9)

    @given(boxes(), st.floats(1, 4))
    def test_contains_input(self, b, gamma):
        assert contains(enlarge(b, gamma), b, tol=1e-9)

    def test_batch_shape(self):
        out = enlarge(np.zeros((7, 4)) + [1, 1, 2, 2], 1.5)
        assert out.shape == (7, 4)


class TestClosestObject:
    def test_exact_match_wins(self):
        gts = np.array([[0, 0, 5, 5], [10, 10, 20, 20], [30, 30, 40, 40], [50, 50, 60, 60]])
        assert closest_object(gts[3], gts) == 3

    def test_center_fallback(self):
        gts = np.array([[0, 0, 10, 10], [60, 0, 70, 10]])
        box = [40, 40, 45, 45]
        # center distances: to (5,5) ~ 49.5, to (65,5) ~ 42.4
        assert closest_object(box, gts) == 1

    def test_empty(self):
        assert closest_object([0, 0, 1, 1], np.zeros((0, 4))) is None
        assert (closest_objects(np.ones((3, 4)), []) == -1).all()

    def test_tie_goes_to_lowest_index(self):
        gts = np.array([[0, 0, 10, 10], [0, 0, 10, 10]])
        assert closest_object([0, 0, 10, 10], gts) == 0

    def test_brute_force_agreement(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            gts = random_boxes(rng, 5, 100)
            box = random_boxes(rng, 1, 100)[0]
            ious = [iou(box, g) for g in gts]
            if max(ious) > 0:
                expect = int(np.argmax(ious))
            else:
                c = [(box[0] + box[2]) / 2, (box[1] + box[3]) / 2]
                d = [np.hypot(c[0] - (g[0] + g[2]) / 2, c[1] - (g[1] + g[3]) / 2) for g in gts]
                expect = int(np.argmin(d))
            assert closest_object(box, gts) == expect


def test_extent_rejects_nonpositive():
    with pytest.raises(ValueError):
        ImageExtent(0, 10)
