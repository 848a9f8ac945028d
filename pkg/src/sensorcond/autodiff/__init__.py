"""Minimal reverse-mode autodiff engine used by the whole package."""

from . import ops
from .gradcheck import grad_check
from .kernels import backend_name
from .rng import RngStream
from .tensor import Tape, Tensor, active_tape, parameter

__all__ = [
    "Tape",
    "Tensor",
    "RngStream",
    "active_tape",
    "backend_name",
    "grad_check",
    "ops",
    "parameter",
]
