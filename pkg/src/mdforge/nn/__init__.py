from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .layers import BatchNorm, Conv, Dense, Dropout, Flatten, MaxPool, ReLU, Softmax
from .network import ModelSpec, Network, gradient_check, reference_spec
from .train import TrainConfig, TrainHistory, evaluate, images_to_batch, predict, train

__all__ = [
    "BatchNorm", "Conv", "Dense", "Dropout", "Flatten", "MaxPool", "ReLU", "Softmax",
    "ModelSpec", "Network", "gradient_check", "reference_spec",
    "TrainConfig", "TrainHistory", "evaluate", "images_to_batch", "predict", "train",
    "CheckpointError", "load_checkpoint", "save_checkpoint",
]
