"""Constraint functions: a piecewise rescaling that herds values into a box.

Values at or above ``upper`` are divided by ``c1``, values at or below
``lower`` are multiplied by ``c2``, and everything strictly in between is
left alone. The map is applied once, so a value far outside the box can
still land outside it; feasibility is checked separately with ``in_range``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class ConstraintSpec:
    lower: float
    upper: float
    c1: float = 20.0
    c2: float = 10.0

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ConfigError(f"lower ({self.lower}) must be below upper ({self.upper})")
        if not self.c1 > 1:
            raise ConfigError(f"c1 must exceed 1, got {self.c1}")
        if not self.c2 > 1:
            raise ConfigError(f"c2 must exceed 1, got {self.c2}")


def apply_constraint(spec: ConstraintSpec, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= spec.upper, x / spec.c1, np.where(x <= spec.lower, x * spec.c2, x))
    return float(out) if out.ndim == 0 else out


def constraint_slope(spec: ConstraintSpec, x):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x >= spec.upper, 1.0 / spec.c1, np.where(x <= spec.lower, spec.c2, 1.0))
    return float(out) if out.ndim == 0 else out


def _check_specs(specs, cols):
    if len(specs) != cols:
        raise ShapeError(f"{len(specs)} constraint slots for {cols} columns")


def apply_constraints_batch(specs, batch) -> tuple:
    """Apply per-column specs (``None`` = unconstrained). Returns ``(values, slopes)``."""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeError(f"expected a 2-D batch, got shape {batch.shape}")
    _check_specs(specs, batch.shape[1])
    out = batch.copy()
    slopes = np.ones_like(batch)
    for j, spec in enumerate(specs):
        if spec is not None:
            out[:, j] = apply_constraint(spec, batch[:, j])
            slopes[:, j] = constraint_slope(spec, batch[:, j])
    return out, slopes


def in_range(specs, features, slack: float = 0.0) -> np.ndarray:
    """Per-row flag: every constrained column inside ``[lower(1-slack), upper(1+slack)]``."""
    if slack < 0:
        raise ConfigError(f"slack must be non-negative, got {slack}")
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features.reshape(1, -1)
    _check_specs(specs, features.shape[1])
    ok = np.ones(features.shape[0], dtype=bool)
    for j, spec in enumerate(specs):
        if spec is not None:
            col = features[:, j]
            ok &= (col >= spec.lower * (1 - slack)) & (col <= spec.upper * (1 + slack))
    return ok
