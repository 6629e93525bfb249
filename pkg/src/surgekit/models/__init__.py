"""Learners for the two-stage surrogate: feed-forward networks and gradient
boosted trees, plus composition, serialization, and grid search."""

from .boosting import BoostConfig, BoostedTrees, train_boosted
from .network import NETWORK_PRESETS, FeedForwardNetwork, NetworkSpec, TrainConfig, train_network
from .two_stage import (
    BoostStage,
    NetworkStage,
    OracleStage,
    TwoStageModel,
    grid_search,
    load_model,
    predict_two_stage,
    save_model,
    train_two_stage,
)

__all__ = [
    "BoostConfig",
    "BoostedTrees",
    "train_boosted",
    "NETWORK_PRESETS",
    "FeedForwardNetwork",
    "NetworkSpec",
    "TrainConfig",
    "train_network",
    "BoostStage",
    "NetworkStage",
    "OracleStage",
    "TwoStageModel",
    "grid_search",
    "load_model",
    "predict_two_stage",
    "save_model",
    "train_two_stage",
]
