"""From-scratch neural-net engine: layers, models, training, checkpoints."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .model import (
    ArchitectureSpec,
    NeuralModel,
    SiameseModel,
    classifier_spec,
    encoder_spec,
    predictor_spec,
    transfer_encoder_weights,
)
from .train import (
    EpochRecord,
    TrainSpec,
    TrainingDiverged,
    ce_loss,
    clip_gradients,
    evaluate_loss,
    grouped_ce_loss,
    make_loss,
    mse_loss,
    train,
)

__all__ = [
    "ArchitectureSpec",
    "CheckpointError",
    "EpochRecord",
    "NeuralModel",
    "SiameseModel",
    "TrainSpec",
    "TrainingDiverged",
    "ce_loss",
    "classifier_spec",
    "clip_gradients",
    "encoder_spec",
    "evaluate_loss",
    "grouped_ce_loss",
    "load_checkpoint",
    "make_loss",
    "mse_loss",
    "predictor_spec",
    "save_checkpoint",
    "train",
    "transfer_encoder_weights",
]
