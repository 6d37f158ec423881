import numpy as np
import pytest

from activeprop.backends import OracleBackend, TinyModelParams, make_backend
from activeprop.geometry import ImageExtent, enlarge, iou_matrix
from activeprop.metrics import recall
from activeprop.nms import NmsSchedule
from activeprop.scenes import SceneSpec, generate_scenes
from activeprop.search import (EngineConfig, attend_refine_repeat, attended_budget, attention_map, finalize,
                               propose, propose_seeds_only)
from activeprop.seeds import SeedConfig, generate_seeds
from conftest import make_scene

TOY = EngineConfig.toy()


class CountingBackend(OracleBackend):
    def __init__(self):
        self.calls = []

    def refine(self, scene, boxes, gamma, M, rng=None):
        self.calls.append(len(boxes))
        return super().refine(scene, boxes, gamma, M, rng)


class TestDriver:
    def test_candidate_accounting(self):
        scene = make_scene([[20, 20, 60, 70], [70, 10, 95, 40]])
        cfg = EngineConfig.toy(seed_cfg=SeedConfig(target_count=300), keep_after_first=50)
        be = CountingBackend()
        trace = attend_refine_repeat(scene, be, cfg)
        n = len(trace.seeds)
        assert len(trace.pooled()[0]) == n + (cfg.T - 1) * 50
        assert be.calls == [n, 50, 50, 50, 50]
        assert trace.n_evaluations == attended_budget(cfg, n)

    def test_t1_equals_single_pass(self):
        scene = make_scene([[23, 31, 67, 58]])
        cfg = EngineConfig.toy(T=1, seed_cfg=SeedConfig(target_count=200))
        boxes, scores = propose(scene, OracleBackend(), cfg)
        seeds = generate_seeds(scene.extent, cfg.seed_cfg)
        out = OracleBackend().refine(scene, seeds, cfg.gamma, cfg.M)
        best = int(np.argmax(out.objectness))  # first maximum
        np.testing.assert_array_equal(boxes[0], out.decode()[best])

    def test_scores_move_with_refined_boxes(self):
        # O^t scores B^{t-1} and is stored with B^t
        scene = make_scene([[20, 20, 60, 70]])
        cfg = EngineConfig.toy(T=2, seed_cfg=SeedConfig(target_count=50), keep_after_first=10)
        trace = attend_refine_repeat(scene, OracleBackend(), cfg)
        b1, s1 = trace.candidates[0]
        np.testing.assert_allclose(s1, iou_matrix(trace.seeds, scene.gts).max(axis=1))
        b2, s2 = trace.candidates[1]
        top = np.argsort(-s1, kind="stable")[:10]
        np.testing.assert_allclose(s2, iou_matrix(b1[top], scene.gts).max(axis=1))

    def test_empty_seed_set(self):
        scene = make_scene([], width=10, height=10)
        boxes, scores = propose(scene, OracleBackend(), TOY)
        assert boxes.shape == (0, 4) and scores.shape == (0,)

    def test_early_stop_freezes_and_reappends(self):
        scene = make_scene([[20, 20, 60, 70]])
        cfg = EngineConfig.toy(seed_cfg=SeedConfig(target_count=200), keep_after_first=40, early_stop_iou=0.9)
        be = CountingBackend()
        trace = attend_refine_repeat(scene, be, cfg)
        assert len(trace.pooled()[0]) == len(trace.seeds) + 4 * 40
        assert sum(be.calls) < len(trace.seeds) + 4 * 40
        assert trace.n_evaluations == sum(be.calls)

    def test_deterministic_with_noisy_backend(self):
        scene = generate_scenes(SceneSpec(seed=2), 1)[0]
        a = propose(scene, make_backend("noisy", seed=1), TOY)
        b = propose(scene, make_backend("noisy", seed=1), TOY)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])

    @pytest.mark.parametrize("name", ["oracle", "noisy", "learned"])
    def test_runs_against_every_backend(self, name):
        scene = generate_scenes(SceneSpec(seed=2), 1)[0]
        cfg = EngineConfig.toy(seed_cfg=SeedConfig(target_count=200), keep_after_first=30)
        boxes, scores = propose(scene, make_backend(name, TinyModelParams.zeros(8)), cfg)
        assert len(boxes) == len(scores) > 0
        assert np.all(np.diff(scores) <= 1e-12)

    def test_well_separated_objects_all_found(self):
        spec = SceneSpec(seed=77, object_count_range=(1, 10), max_pair_iou=0.0)
        checked = 0
        for scene in generate_scenes(spec, 40):
            grown = enlarge(scene.gts, 1.8)
            m = iou_matrix(grown, grown)
            np.fill_diagonal(m, 0)
            if m.max() > 0:
                continue
            checked += 1
            boxes, _ = propose(scene, OracleBackend(), TOY)
            assert recall(boxes[:100], scene.gts, 0.9) == 1.0
        assert checked >= 5

    def test_seeds_only_ranks_seed_boxes(self):
        scene = make_scene([[20, 20, 60, 70]])
        cfg = EngineConfig.toy(seed_cfg=SeedConfig(target_count=100))
        boxes, _ = propose_seeds_only(scene, OracleBackend(), cfg)
        seeds = {tuple(s) for s in generate_seeds(scene.extent, cfg.seed_cfg)}
        assert all(tuple(b) in seeds for b in boxes)


class TestFinalize:
    def test_clips_scores_and_limits(self):
        rng = np.random.default_rng(0)
        c = rng.uniform(0, 100, (50, 2))
        boxes = np.column_stack([c, c + 10])
        cfg = EngineConfig(nms_keep=20, schedule=NmsSchedule((0.5, 0.9), (5, 20)))
        out, s = finalize(boxes, rng.uniform(-0.5, 1.5, 50), cfg)
        assert len(out) <= 20 and np.isfinite(s).all()


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = EngineConfig.toy(early_stop_iou=0.9, T=3)
        cfg.save(tmp_path / "c.json")
        assert EngineConfig.load(tmp_path / "c.json") == cfg

    def test_rejects_unknown_and_invalid(self):
        with pytest.raises(ValueError):
            EngineConfig.from_json({"bogus": 1})
        with pytest.raises(ValueError):
            EngineConfig(T=0)
        with pytest.raises(ValueError):
            EngineConfig(early_stop_iou=1.5)


class TestAttentionMap:
    def test_counts_and_normalization(self):
        ext = ImageExtent(8, 8)
        maps = attention_map([np.array([[0, 0, 8, 8], [0, 0, 4, 4]]), (np.zeros((0, 4)), np.zeros(0))], ext, cell=4)
        np.testing.assert_allclose(maps[0], [[1.0, 0.5], [0.5, 0.5]])
        assert not maps[1].any()

    def test_bad_cell(self):
        with pytest.raises(ValueError):
            attention_map([], ImageExtent(4, 4), cell=0)
