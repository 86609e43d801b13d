"""From-scratch CNN engine: layers, Adam, augmentation and training."""

from .augment import AugmentConfig, augment
from .checkpoint import load_checkpoint, save_checkpoint
from .functional import mish, relu, softmax, softmax_cross_entropy, swish
from .layers import Activation, BatchNorm, Conv2D, Dense, Dropout, Flatten, MaxPool2D
from .network import LayerSpec, Network, NetworkSpec, build_proposed_network
from .optim import AdamState, adam_step
from .train import EarlyStopping, TrainConfig, TrainingHistory, evaluate, predict, train

__all__ = [
    "Activation", "AdamState", "AugmentConfig", "BatchNorm", "Conv2D", "Dense", "Dropout",
    "EarlyStopping", "Flatten", "LayerSpec", "MaxPool2D", "Network", "NetworkSpec",
    "TrainConfig", "TrainingHistory", "adam_step", "augment", "build_proposed_network",
    "evaluate", "load_checkpoint", "mish", "predict", "relu", "save_checkpoint", "softmax",
    "softmax_cross_entropy", "swish", "train",
]
