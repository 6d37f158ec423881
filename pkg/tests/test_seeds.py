import math

import numpy as np
import pytest

from activeprop.geometry import ImageExtent, contains
from activeprop.seeds import SeedConfig, generate_seeds


class TestSeedLayout:
    def test_single_fit(self):
        cfg = SeedConfig(aspect_ratios=(1.0,), min_dims=(16,), target_count=1)
        np.testing.assert_array_equal(generate_seeds(ImageExtent(16, 16), cfg), [[0, 0, 16, 16]])

    def test_two_placements_span_width(self):
        # stride (32 - 16) / (2 - 1) = 16
        cfg = SeedConfig(aspect_ratios=(1.0,), min_dims=(16,), target_count=2)
        seeds = generate_seeds(ImageExtent(32, 16), cfg)
        assert sorted(seeds[:, 0]) == [0.0, 16.0]
        assert (seeds[:, 2] - seeds[:, 0] == 16).all()

    def test_default_count_at_full_scale(self):
        seeds = generate_seeds(ImageExtent(1000, 600))
        assert 9500 <= len(seeds) <= 10500

    @pytest.mark.parametrize("extent", [(1000, 600), (640, 480), (160, 150), (500, 333)])
    def test_never_exceeds_cap(self, extent):
        cfg = SeedConfig(target_count=2000)
        assert len(generate_seeds(ImageExtent(*extent), cfg)) <= math.ceil(1.05 * 2000)

    def test_inside_extent(self):
        ext = ImageExtent(300, 200)
        seeds = generate_seeds(ext, SeedConfig(target_count=3000))
        assert contains(ext.as_box(), seeds).all()

    def test_too_small_image(self):
        assert generate_seeds(ImageExtent(10, 10)).shape == (0, 4)

    def test_deterministic(self):
        ext = ImageExtent(257, 191)
        np.testing.assert_array_equal(generate_seeds(ext), generate_seeds(ext))

    def test_config_order_and_shapes(self):
        cfg = SeedConfig(aspect_ratios=(0.5, 2.0), min_dims=(16, 32), target_count=40)
        seeds = generate_seeds(ImageExtent(200, 200), cfg)
        wh = np.column_stack([seeds[:, 2] - seeds[:, 0], seeds[:, 3] - seeds[:, 1]])
        runs = [tuple(wh[0])]
        for row in map(tuple, wh):
            if row != runs[-1]:
                runs.append(row)
        # one contiguous block per configuration, ratio-major
        assert runs == [(16, 32), (32, 64), (32, 16), (64, 32)]

    def test_row_major_within_configuration(self):
        cfg = SeedConfig(aspect_ratios=(1.0,), min_dims=(16,), target_count=9)
        seeds = generate_seeds(ImageExtent(48, 48), cfg)
        keys = list(zip(seeds[:, 1], seeds[:, 0]))
        assert keys == sorted(keys)


def test_invalid_config():
    with pytest.raises(ValueError):
        SeedConfig(target_count=0)
    with pytest.raises(ValueError):
        SeedConfig(aspect_ratios=(-1.0,))
