"""Gradient-based design by training the unrolled density-evolution recursion."""
from .dataset import Dataset, generate_dataset
from .model import (GradientVector, InvalidConfigError, NdeModel, TrainConfig,
                    TrainingSample, backward, forward, loss, weighted_total)
from .optim import OptState, adam_step, rmsprop_step, sgd_step
from .trainer import (EpochRecord, TrainResult, TrainingDivergedError, evaluate_delta,
                      init_model, train, train_restarts, write_history)

__all__ = ["Dataset", "generate_dataset", "GradientVector", "InvalidConfigError", "NdeModel",
           "TrainConfig", "TrainingSample", "backward", "forward", "loss", "weighted_total",
           "OptState", "adam_step", "rmsprop_step", "sgd_step", "EpochRecord", "TrainResult",
           "TrainingDivergedError", "evaluate_delta", "init_model", "train", "train_restarts",
           "write_history"]
