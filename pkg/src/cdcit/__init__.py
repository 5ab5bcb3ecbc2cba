"""Conditional independence testing with diffusion-based conditional resampling."""

from .cmi import CmiConfig, CmiEstimate, estimate_cmi
from .crt import TestConfig, TestResult, p_value, run_cdcit
from .dataset import Dataset, read_csv, write_csv
from .diffusion import DiffusionConfig, ScoreModel, sample, train_score
from .errors import CdcitError, DomainError, InputError, NumericError, ParseError, ShapeError
from .synthetic import ScenarioSpec

__version__ = "0.1.0"

__all__ = [
    "CdcitError",
    "CmiConfig",
    "CmiEstimate",
    "Dataset",
    "DiffusionConfig",
    "DomainError",
    "InputError",
    "NumericError",
    "ParseError",
    "ScenarioSpec",
    "ScoreModel",
    "ShapeError",
    "TestConfig",
    "TestResult",
    "estimate_cmi",
    "p_value",
    "read_csv",
    "run_cdcit",
    "sample",
    "train_score",
    "write_csv",
    "__version__",
]
