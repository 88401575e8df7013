"""Oracle-guided generative networks: train a generator to invert a frozen oracle."""

__version__ = "0.1.0"

from .constraint import ConstraintSpec, apply_constraint, apply_constraints_batch, constraint_slope, in_range
from .errors import (
    ConfigError,
    DomainError,
    OGGNError,
    ParseError,
    ShapeError,
    TrainingDivergedError,
    ValidationError,
)
from .generator import (
    Constrained,
    Fixed,
    Free,
    GenerationResult,
    GenerationTask,
    assemble_features,
    oggn_train,
    sample_noise,
    solve_system,
    verify_result,
)
from .oracle import Dataset, OracleModel, oracle_value, oracle_value_and_grad, synth_dataset, train_oracle
from .poly import DEMO_SYSTEM, POLY4, PolyFunction, PolySystem, PolyTerm, poly_eval, poly_grad
