"""Surrogate-guided hard-label black-box attacks on small numpy classifiers."""
from ._accel import HAVE_NUMBA, backend
from .baselines import HsjaConfig, hsja_attack
from .data import Dataset
from .dgm import DgmConfig, dgm_attack, dgm_tune
from .errors import (
    AttackFailed,
    BudgetExhausted,
    DataError,
    DegenerateDirection,
    DegenerateGradient,
    FormatError,
    InitFailed,
    InputError,
    LineSearchFailed,
    NoAdversarialGradient,
    SqbaError,
    TrainingError,
)
from .harness import AsrTable, ExperimentSpec, emit_report, prepare_eval_set, run_experiment
from .io import load_dataset, load_model, save_dataset, save_model
from .nn import Network
from .oracle import HardLabelOracle
from .sqba import AttackResult, SqbaConfig, rho, sqba_attack
from .train import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "AsrTable",
    "AttackFailed",
    "AttackResult",
    "BudgetExhausted",
    "DataError",
    "Dataset",
    "DegenerateDirection",
    "DegenerateGradient",
    "DgmConfig",
    "ExperimentSpec",
    "FormatError",
    "HAVE_NUMBA",
    "HardLabelOracle",
    "HsjaConfig",
    "InitFailed",
    "InputError",
    "LineSearchFailed",
    "Network",
    "NoAdversarialGradient",
    "SqbaConfig",
    "SqbaError",
    "TrainConfig",
    "TrainingError",
    "backend",
    "dgm_attack",
    "dgm_tune",
    "emit_report",
    "hsja_attack",
    "load_dataset",
    "load_model",
    "prepare_eval_set",
    "rho",
    "run_experiment",
    "save_dataset",
    "save_model",
    "sqba_attack",
    "train",
]
