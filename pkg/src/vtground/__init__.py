"""Fast video temporal grounding with commonsense-aware cross-modal
alignment and a precomputed proposal gallery."""

from .config import TrainConfig
from .tensor import Tensor, grad_check, parameter

__all__ = ["TrainConfig", "Tensor", "grad_check", "parameter"]
