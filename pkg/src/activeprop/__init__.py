"""Class-agnostic object proposals by active attend-and-refine box search."""
from .backends import LearnedBackend, NoisyOracleBackend, OracleBackend, TinyModelParams, make_backend
from .estimator import ActiveBoxProposer
from .geometry import ImageExtent, iou, iou_matrix
from .inout import ProbVectors, decode_ml
from .metrics import average_recall, evaluate
from .nms import NmsSchedule, greedy_nms, multithreshold_reorder
from .scenes import SceneSpec, SyntheticScene, generate_scene, generate_scenes
from .search import EngineConfig, attend_refine_repeat, propose
from .seeds import SeedConfig, generate_seeds
from .training import TrainConfig, train

__version__ = "0.1.0"
__all__ = [
    "ActiveBoxProposer", "EngineConfig", "ImageExtent", "LearnedBackend", "NmsSchedule",
    "NoisyOracleBackend", "OracleBackend", "ProbVectors", "SceneSpec", "SeedConfig",
    "SyntheticScene", "TinyModelParams", "TrainConfig", "attend_refine_repeat",
    "average_recall", "decode_ml", "evaluate", "generate_scene", "generate_scenes",
    "generate_seeds", "greedy_nms", "iou", "iou_matrix", "make_backend",
    "multithreshold_reorder", "propose", "train",
]
