"""Lifted neural surrogates for scalar conservation laws with shocks."""

from .estimator import LiftEmbedRegressor
from .lifting import build_geometry, phi, phi_limits
from .network import Network, evaluate, forward, forward_with_input_grad, init_network
from .problems import exact, get_problem, problem_names
from .trainer import TrainConfig, TrainResult, project, relative_l2, train, train_forward, train_inverse

__version__ = "0.1.0"

__all__ = [
    "LiftEmbedRegressor", "Network", "TrainConfig", "TrainResult", "build_geometry", "evaluate", "exact",
    "forward", "forward_with_input_grad", "get_problem", "init_network", "phi", "phi_limits",
    "problem_names", "project", "relative_l2", "train", "train_forward", "train_inverse",
]
