"""A package for adversarial numerical analysis: estimating the unknowns of stochastic models."""

from __future__ import annotations


__all__ = [
    "ExperimentSpec",
    "Trainer",
    "load_config",
    "run_experiment",
    "train",
]
__version__ = "0.0.1"

from .config import ExperimentSpec, load_config
from .experiments import run_experiment
from .trainer import Trainer, train
