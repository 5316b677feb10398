"""Boosting with simplex-constrained quadratic weight selection."""
from .balancing import BalanceConfig, balance
from .dataset import Dataset, SyntheticSpec, generate_synthetic, load_csv, save_csv, train_test_split
from .errors import ConfigError, CVQBoostError, DataError, SchemaError, SolverError, VersionError
from .hamiltonian import Hamiltonian, assemble, dynamic_range_db, energy, quantize_to_range
from .metrics import auc
from .model import Model, TrainConfig, decision_scores, load, predict, save, train, tune_lambda
from .solver import Solution, SolverConfig, project_simplex, solve
from .weak import PoolConfig, WeakClassifier, build_pool, predict_matrix

__version__ = "0.1.0"

__all__ = [
    "BalanceConfig", "balance",
    "Dataset", "SyntheticSpec", "generate_synthetic", "load_csv", "save_csv", "train_test_split",
    "ConfigError", "CVQBoostError", "DataError", "SchemaError", "SolverError", "VersionError",
    "Hamiltonian", "assemble", "dynamic_range_db", "energy", "quantize_to_range",
    "auc",
    "Model", "TrainConfig", "decision_scores", "load", "predict", "save", "train", "tune_lambda",
    "Solution", "SolverConfig", "project_simplex", "solve",
    "PoolConfig", "WeakClassifier", "build_pool", "predict_matrix",
]
