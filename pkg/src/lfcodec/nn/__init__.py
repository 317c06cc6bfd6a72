"""Small float64 neural-network kit: convolutions, batch norm, PReLU,
softplus, MSE, Adam and a binary model format."""

from .layers import (BatchNorm2d, Conv2d, GlobalAvgPool, Layer, PReLU, Sequential, Sigmoid,
                     Softplus, mse, param_pairs, softplus)
from .optim import AdamState, adam_step, step_pairs

__all__ = [
    "AdamState",
    "BatchNorm2d",
    "Conv2d",
    "GlobalAvgPool",
    "Layer",
    "PReLU",
    "Sequential",
    "Sigmoid",
    "Softplus",
    "adam_step",
    "mse",
    "param_pairs",
    "softplus",
    "step_pairs",
]
