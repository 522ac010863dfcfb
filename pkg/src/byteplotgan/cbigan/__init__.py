"""Consistency bidirectional GAN: networks, losses, checkpoints."""

from .checkpoint import (
    LoadedCheckpoint,
    load_checkpoint,
    parameter_digest,
    save_checkpoint,
)
from .losses import (
    GRADIENT_PENALTY_WEIGHT,
    LossBreakdown,
    ScoreConfig,
    anomaly_score,
    anomaly_scores,
    consistency_loss,
    critic_loss,
    eg_loss,
    gradient_penalty,
)
from .networks import BACKBONES, CBiGAN, ModelConfig, build_model

__all__ = [
    "BACKBONES",
    "CBiGAN",
    "ModelConfig",
    "build_model",
    "GRADIENT_PENALTY_WEIGHT",
    "LossBreakdown",
    "ScoreConfig",
    "anomaly_score",
    "anomaly_scores",
    "consistency_loss",
    "critic_loss",
    "eg_loss",
    "gradient_penalty",
    "LoadedCheckpoint",
    "load_checkpoint",
    "parameter_digest",
    "save_checkpoint",
]
