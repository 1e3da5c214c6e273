"""Small NHWC network engine with explicit gradients."""

from .layers import Concat, Conv2D, Dense, Dropout, Flatten, GlobalAvgPool2D, MaxPool2D
from .losses import bce, bce_loss
from .network import Block, NetworkSpec, backward, copy_params, forward, init_params, predict
from .optim import SGD, Optimizer, RMSprop, rmsprop_step, sgd_step
from .rng import Rng

__all__ = [
    "Block", "Concat", "Conv2D", "Dense", "Dropout", "Flatten", "GlobalAvgPool2D", "MaxPool2D",
    "NetworkSpec", "Optimizer", "RMSprop", "Rng", "SGD", "backward", "bce", "bce_loss",
    "copy_params", "forward", "init_params", "predict", "rmsprop_step", "sgd_step",
]
