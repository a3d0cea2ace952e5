"""
twostage

Two-stage training for graph classification: triplet-loss metric
pre-training of a GNN encoder, then a classifier on frozen (2stg) or
fine-tuned (2stg+) embeddings, compared against end-to-end training.
"""

__version__ = "1.0.0"

from .core.models import GnnModel, ModelConfig
from .core.training import TrainConfig, run_trial

__all__ = ["GnnModel", "ModelConfig", "TrainConfig", "run_trial"]
