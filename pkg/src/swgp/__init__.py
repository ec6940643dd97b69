"""Sliding-window Gaussian-process filtering."""

from .base import Identity, StreamingFilter
from .filter import RpropState, SlidingWindow, SlidingWindowGP, rprop_step
from .kernels import Hyperparameters, kernel_matrix, kernel_matrix_partial, kernel_vector, se_kernel

__all__ = [
    "Hyperparameters",
    "Identity",
    "RpropState",
    "SlidingWindow",
    "SlidingWindowGP",
    "StreamingFilter",
    "kernel_matrix",
    "kernel_matrix_partial",
    "kernel_vector",
    "rprop_step",
    "se_kernel",
]

__version__ = "0.1.0"
