from .checkpoint import (
    BadMagicError,
    CheckpointError,
    ShapeMismatchError,
    TruncatedCheckpointError,
    VersionMismatchError,
    load_checkpoint,
    save_checkpoint,
)
from .config import ConvLayer, ModelConfig, TrainConfig
from .model import ModelParams, NonFiniteLossError, forward, init_params, logits, loss_and_gradient, predict_proba, softmax
from .train import Adam, EpochRecord, TrainResult, dataset_stats, train
