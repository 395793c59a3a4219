"""PFN transformer: encoding, forward pass, prior-fitting and checkpoints."""
from .checkpoint import Checkpoint, CheckpointError, load, read_header, save
from .encode import EncodedBatch, encode
from .predict import bce, predict
from .train import TrainConfig, TrainingAborted, prior_fit, training_task
from .transformer import ModelConfig, forward, init_params

__all__ = [
    "Checkpoint", "CheckpointError", "load", "read_header", "save",
    "EncodedBatch", "encode", "bce", "predict",
    "TrainConfig", "TrainingAborted", "prior_fit", "training_task",
    "ModelConfig", "forward", "init_params",
]
