"""Normalizing-flow density estimation with hand-written gradients."""

from .mlp import MLP
from .model import (
    FlowModel,
    LossHistory,
    TrainConfig,
    build_realnvp_flow,
    build_spline_flow,
    from_json,
    grad_nll,
    load_model,
    nll_loss,
    save_model,
    to_json,
    train,
)
from .transforms import AffineCoupling, SplineCoupling, Standardize, spline_knots

__all__ = [
    "MLP", "FlowModel", "LossHistory", "TrainConfig", "AffineCoupling", "SplineCoupling",
    "Standardize", "build_realnvp_flow", "build_spline_flow", "from_json", "grad_nll",
    "load_model", "nll_loss", "save_model", "spline_knots", "to_json", "train",
]
