"""
Core functionality for twostage.

Contains the autograd engine, graph datasets, GNN encoders, the training
regimes, embedding analysis and the experiment runner.
"""

from .experiment import ExperimentRunner, load_experiment_config
from .graph_data import Graph, GraphDataset
from .models import GnnModel, ModelConfig
from .training import TrainConfig, run_trial

__all__ = [
    "ExperimentRunner",
    "GnnModel",
    "Graph",
    "GraphDataset",
    "ModelConfig",
    "TrainConfig",
    "load_experiment_config",
    "run_trial",
]
