"""Minimal trainable network core: LSTM stack, dense head, scaled softmax, Adam."""

from .adam import Adam
from .functional import scaled_softmax, scaled_softmax_backward, sigmoid
from .layers import DenseLayer, LstmLayer
from .network import Network

__all__ = [
    "Adam",
    "DenseLayer",
    "LstmLayer",
    "Network",
    "scaled_softmax",
    "scaled_softmax_backward",
    "sigmoid",
]
