from .domains import DomainConfig, SyntheticDomain, make_domains
from .experiment import (
    ERROR_FLOOR,
    ConfigError,
    ExperimentConfig,
    ExperimentReport,
    aode_pipeline,
    evaluate_model,
    load_experiment_config,
    run_experiment,
    sequential_finetune,
)
from .model import ToyModel, grad_check
from .training import TrainConfig, TrainingDiverged, train

__all__ = [
    "ERROR_FLOOR",
    "ConfigError",
    "DomainConfig",
    "ExperimentConfig",
    "ExperimentReport",
    "SyntheticDomain",
    "ToyModel",
    "TrainConfig",
    "TrainingDiverged",
    "aode_pipeline",
    "evaluate_model",
    "grad_check",
    "load_experiment_config",
    "make_domains",
    "run_experiment",
    "sequential_finetune",
    "train",
]
