"""Generator training against a frozen oracle.

A small network maps a fixed block of random noise to candidate feature
vectors. Each epoch the candidates are scored by the oracle and the
generator's weights (never the oracle's) are moved to pull the oracle's
output toward a desired target. Features can be left free, pinned to a
constant, or passed through a constraint function to keep them in a box.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .constraint import ConstraintSpec, apply_constraint, constraint_slope, in_range
from .errors import ConfigError, DomainError, ShapeError, TrainingDivergedError, ValidationError
from .oracle import OracleModel, oracle_value_and_grad
from .poly import PolyFunction, PolySystem, poly_eval, system_residuals
from .seeding import derive_seed, rng_for

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
STOP_RULES = ("tolerance", "range_exit")


@dataclass(frozen=True)
class Free:
    nonnegative: bool = True


@dataclass(frozen=True)
class Fixed:
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise ConfigError(f"fixed value must be finite, got {self.value}")


@dataclass(frozen=True)
class Constrained:
    spec: ConstraintSpec


def mode_to_dict(mode) -> dict:
    if isinstance(mode, Fixed):
        return {"mode": "fixed", "value": mode.value}
    if isinstance(mode, Constrained):
        return {"mode": "constrained", **asdict(mode.spec)}
    return {"mode": "free", "nonnegative": mode.nonnegative}


def mode_from_dict(d: dict):
    kind = d.get("mode")
    if kind == "fixed":
        return Fixed(float(d["value"]))
    if kind == "constrained":
        return Constrained(ConstraintSpec(d["lower"], d["upper"], d["c1"], d["c2"]))
    if kind == "free":
        return Free(bool(d.get("nonnegative", True)))
    raise ValidationError(f"unknown feature mode {kind!r}")


@dataclass
class GenerationTask:
    oracle: OracleModel
    desired_target: float
    feature_modes: list = None
    rows: int = 8
    noise_dim: int = 16
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    max_epochs: int = 2000
    lr: float = 1e-3
    tolerance: float = None
    seed: int = 0
    stop_rule: str = "tolerance"
    slack: float = 0.01
    truth: PolyFunction = None
    output_scales: list = None

    def __post_init__(self):
        if self.feature_modes is None:
            self.feature_modes = [Free() for _ in range(self.oracle.input_dim)]
        self.feature_modes = list(self.feature_modes)
        if len(self.feature_modes) != self.oracle.input_dim:
            raise ShapeError(
                f"{len(self.feature_modes)} feature modes for an oracle with "
                f"{self.oracle.input_dim} inputs"
            )
        if self.rows < 1 or self.noise_dim < 1:
            raise ConfigError("rows and noise_dim must be at least 1")
        if self.max_epochs < 1:
            raise ConfigError("max_epochs must be at least 1")
        if self.tolerance is None:
            self.tolerance = default_tolerance(self.desired_target)
        if not self.tolerance > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tolerance}")
        if self.stop_rule not in STOP_RULES:
            raise ConfigError(f"stop_rule must be one of {STOP_RULES}, got {self.stop_rule!r}")
        if self.truth is not None and self.truth.n_vars != self.oracle.input_dim:
            raise ShapeError("truth function and oracle disagree on the number of features")
        if self.output_scales is None:
            self.output_scales = default_output_scales(self.oracle, self.feature_modes)
        self.output_scales = [float(c) for c in self.output_scales]
        if len(self.output_scales) != len(self.free_columns):
            raise ShapeError(
                f"{len(self.output_scales)} output scales for {len(self.free_columns)} non-fixed features"
            )
        if not all(c > 0 for c in self.output_scales):
            raise ConfigError("output scales must be positive")

    @property
    def free_columns(self) -> list:
        return [j for j, m in enumerate(self.feature_modes) if not isinstance(m, Fixed)]

    @property
    def specs(self) -> list:
        return [m.spec if isinstance(m, Constrained) else None for m in self.feature_modes]

    def config(self) -> dict:
        """Everything but the oracle itself, as plain JSON-ready data."""
        return {
            "desired_target": self.desired_target,
            "feature_modes": [mode_to_dict(m) for m in self.feature_modes],
            "rows": self.rows,
            "noise_dim": self.noise_dim,
            "hidden": list(self.hidden),
            "activation": self.activation,
            "max_epochs": self.max_epochs,
            "lr": self.lr,
            "tolerance": self.tolerance,
            "seed": self.seed,
            "stop_rule": self.stop_rule,
            "slack": self.slack,
            "output_scales": list(self.output_scales),
        }


def default_output_scales(oracle: OracleModel, modes) -> list:
    """Unit of each non-fixed generator output.

    A constrained feature works in units of its upper bound; a free feature
    of a neural oracle in units of that oracle's training spread; anything
    else in plain units. Adam moves every raw output at a similar pace, so
    this keeps a step a comparable fraction of each feature's useful range.
    """
    out = []
    for j, m in enumerate(modes):
        if isinstance(m, Fixed):
            continue
        if isinstance(m, Constrained) and m.spec.upper > 0:
            out.append(float(m.spec.upper))
        elif oracle.kind == "neural":
            out.append(float(oracle.feature_scales[j]))
        else:
            out.append(1.0)
    return out


def default_tolerance(desired_target: float) -> float:
    """Half a percent of the target, squared; a fixed floor for targets near zero."""
    return (0.005 * desired_target) ** 2 if desired_target else 1e-4


@dataclass
class GenerationResult:
    features: np.ndarray
    predicted_targets: np.ndarray
    loss_history: list
    epochs_run: int
    stop_reason: str
    best_epoch: int
    best_loss: float
    true_targets: np.ndarray = None
    residuals: np.ndarray = None
    config: dict = field(default_factory=dict)


def sample_noise(rows: int, noise_dim: int, seed: int) -> np.ndarray:
    """Uniform ``[0, 1)`` block; drawn once per task and held fixed."""
    if rows < 1 or noise_dim < 1:
        raise ConfigError("rows and noise_dim must be at least 1")
    return rng_for(seed, "noise").random((rows, noise_dim))


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_slope(x):
    # logistic sigmoid, written to avoid overflow for large |x|
    return np.exp(-np.logaddexp(0.0, -x))


def assemble_features(raw, modes, scales=None) -> tuple:
    """Build full feature rows from generator output.

    ``raw`` has one column per non-fixed mode, in order. A non-negative
    column becomes ``scale * softplus(raw)``, then goes through its
    constraint function if it has one; ``scales`` (one per raw column,
    default 1) sets the unit the generator works in. Returns
    ``(features, slopes)`` where ``slopes`` holds d(feature)/d(raw column),
    zero for fixed features.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim == 1:
        raw = raw.reshape(1, -1)
    k = sum(not isinstance(m, Fixed) for m in modes)
    if raw.shape[1] != k:
        raise ShapeError(f"generator emits {raw.shape[1]} columns, {k} non-fixed features")
    scales = np.ones(k) if scales is None else np.asarray(scales, dtype=np.float64)
    if scales.shape != (k,):
        raise ShapeError(f"{scales.shape[0]} output scales for {k} non-fixed features")
    n = raw.shape[0]
    feats = np.empty((n, len(modes)))
    slopes = np.zeros((n, len(modes)))
    col = 0
    for j, mode in enumerate(modes):
        if isinstance(mode, Fixed):
            feats[:, j] = mode.value
            continue
        r = raw[:, col]
        c = scales[col]
        col += 1
        if isinstance(mode, Free) and not mode.nonnegative:
            feats[:, j] = c * r
            slopes[:, j] = c
            continue
        s = c * softplus(r)
        ds = c * softplus_slope(r)
        if isinstance(mode, Constrained):
            feats[:, j] = apply_constraint(mode.spec, s)
            slopes[:, j] = ds * constraint_slope(mode.spec, s)
        else:
            feats[:, j] = s
            slopes[:, j] = ds
    return feats, slopes


def _build_generator(task: GenerationTask) -> nn.Network:
    k = len(task.free_columns)
    sizes = [task.noise_dim, *task.hidden, k]
    acts = [task.activation] * len(task.hidden) + ["identity"]
    return nn.init_network(sizes, acts, seed=derive_seed(task.seed, "generator"))


def oggn_train(task: GenerationTask) -> GenerationResult:
    """Train a fresh generator until the loss is within tolerance or a stop rule fires.

    The reported features come from the best-loss epoch. When some features
    are constrained, only epochs where every row was inside its box (with
    ``task.slack``) are eligible, falling back to the overall best if none was.
    """
    noise = sample_noise(task.rows, task.noise_dim, task.seed)
    modes = task.feature_modes
    specs = task.specs
    free = task.free_columns
    constrained = any(s is not None for s in specs)
    target = float(task.desired_target)

    gen = _build_generator(task) if free else None
    state = nn.AdamState.for_network(gen, lr=task.lr) if free else None

    history = []
    best = None  # (loss, epoch, features, predictions, feasible)
    armed = np.zeros(task.rows, dtype=bool)
    stop_reason = "max_epochs"

    for epoch in range(1, task.max_epochs + 1):
        if free:
            raw, cache = nn.forward(gen, noise)
        else:
            raw = np.zeros((task.rows, 0))
        feats, slopes = assemble_features(raw, modes, task.output_scales)
        try:
            pred, d_pred_d_feat = oracle_value_and_grad(task.oracle, feats)
        except DomainError as exc:
            raise DomainError(f"epoch {epoch}: {exc}; features {feats.tolist()}") from exc
        err = pred[:, 0] - target
        loss = float(np.mean(err * err))
        if not math.isfinite(loss) or not np.all(np.isfinite(feats)):
            raise TrainingDivergedError(f"generator loss became non-finite at epoch {epoch}", epoch=epoch)
        history.append(loss)

        inside = in_range(specs, feats, task.slack)
        feasible = bool(inside.all())
        if best is None or (feasible, -loss) > (best[4], -best[0]):
            best = (loss, epoch, feats.copy(), pred.copy(), feasible)

        # with every feature fixed there is nothing to learn; run out the epochs
        if free and loss <= task.tolerance and (feasible or not constrained):
            stop_reason = "tolerance"
            break
        if task.stop_rule == "range_exit" and constrained:
            if np.any(armed & ~inside):
                stop_reason = "range_exit"
                break
            armed |= inside
        if not free or epoch == task.max_epochs:
            continue

        # d loss / d pred -> oracle input gradient -> assembly slopes -> generator
        d_pred = 2.0 * err / task.rows
        d_feat = d_pred[:, None] * d_pred_d_feat * slopes
        grads, _ = nn.backward(gen, cache, d_feat[:, free])
        nn.adam_step(gen, grads, state)
        if epoch % 200 == 0:
            log.debug("epoch %d loss %.6g", epoch, loss)

    loss, epoch, feats, pred, _ = best
    result = GenerationResult(
        features=feats,
        predicted_targets=pred,
        loss_history=history,
        epochs_run=len(history),
        stop_reason=stop_reason,
        best_epoch=epoch,
        best_loss=loss,
        config=task.config(),
    )
    if task.truth is not None:
        result.true_targets = poly_eval(task.truth, feats).reshape(-1, 1)
    log.info(
        "stopped after %d epochs (%s); best loss %.6g at epoch %d",
        result.epochs_run, stop_reason, loss, epoch,
    )
    return result


def solve_system(
    system: PolySystem,
    rows: int = 8,
    noise_dim: int = 16,
    hidden=(64, 64),
    max_epochs: int = 5000,
    lr: float = 1e-3,
    tolerance: float = 1e-4,
    seed: int = 0,
) -> GenerationResult:
    """Drive the residual norm of ``system`` to zero with a generator.

    Variables that carry a fractional exponent anywhere in the system are
    kept non-negative through softplus; the rest are unconstrained.
    """
    oracle = OracleModel.residual_norm(system)
    frac = system.fractional_vars()
    modes = [Free(nonnegative=j in frac) for j in range(system.n_vars)]
    task = GenerationTask(
        oracle, 0.0, modes, rows=rows, noise_dim=noise_dim, hidden=tuple(hidden),
        max_epochs=max_epochs, lr=lr, tolerance=tolerance, seed=seed,
    )
    result = oggn_train(task)
    result.residuals = system_residuals(system, result.features).reshape(rows, -1)
    return result


def auto_constants(task: GenerationTask, epochs: int = 50, floor: float = 2.0) -> list:
    """Pick ``c1``/``c2`` for each constrained feature from a short unconstrained run.

    Runs ``epochs`` epochs with the constraints lifted, then sets
    ``c1 = ceil(max_output / upper)`` and ``c2 = ceil(lower / min_positive_output)``,
    both at least ``floor``. Returns new feature modes.
    """
    probe_modes = [Free() if isinstance(m, Constrained) else m for m in task.feature_modes]
    # tiny tolerance: the probe must run all its epochs
    probe = GenerationTask(
        task.oracle, task.desired_target, probe_modes, rows=task.rows,
        noise_dim=task.noise_dim, hidden=task.hidden, activation=task.activation,
        max_epochs=epochs, lr=task.lr, tolerance=np.finfo(float).tiny, seed=task.seed,
    )
    feats = oggn_train(probe).features
    out = []
    for j, mode in enumerate(task.feature_modes):
        if not isinstance(mode, Constrained):
            out.append(mode)
            continue
        s = mode.spec
        col = feats[:, j]
        c1 = max(floor, math.ceil(col.max() / s.upper)) if s.upper > 0 else floor
        pos = col[col > 0]
        c2 = max(floor, math.ceil(s.lower / pos.min())) if pos.size and s.lower > 0 else floor
        out.append(Constrained(ConstraintSpec(s.lower, s.upper, float(c1), float(c2))))
    return out


def verify_result(result: GenerationResult, truth: PolyFunction) -> list:
    """Audit each generated row against the true function.

    Returns one dict per row with the true value, the oracle's prediction,
    and the oracle-vs-truth and target-vs-truth gaps.
    """
    feats = np.asarray(result.features, dtype=np.float64)
    if feats.ndim != 2 or feats.shape[1] != truth.n_vars:
        raise ShapeError(f"result has {feats.shape[-1]} features, truth takes {truth.n_vars}")
    true = poly_eval(truth, feats)
    target = result.config.get("desired_target")
    report = []
    for i in range(feats.shape[0]):
        pred = float(result.predicted_targets[i, 0])
        row = {
            "features": feats[i].tolist(),
            "true_value": float(true[i]),
            "predicted": pred,
            "oracle_gap": abs(pred - float(true[i])),
        }
        if target is not None:
            row["target_gap"] = abs(float(target) - float(true[i]))
            row["target_pred_gap"] = abs(float(target) - pred)
        report.append(row)
    return report


def result_to_dict(result: GenerationResult, config_echo: dict = None) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "features": result.features.tolist(),
        "predicted_targets": result.predicted_targets.tolist(),
        "true_targets": None if result.true_targets is None else result.true_targets.tolist(),
        "loss_history": list(result.loss_history),
        "epochs_run": result.epochs_run,
        "stop_reason": result.stop_reason,
        "best_epoch": result.best_epoch,
        "best_loss": result.best_loss,
        "config_echo": config_echo if config_echo is not None else result.config,
    }
    if result.residuals is not None:
        d["residuals"] = result.residuals.tolist()
    return d


def result_from_dict(d: dict, where: str = "result") -> GenerationResult:
    for key in ("features", "predicted_targets", "loss_history", "stop_reason"):
        if key not in d:
            raise ValidationError(f"{where}: missing field {key!r}")
    feats = np.array(d["features"], dtype=np.float64)
    pred = np.array(d["predicted_targets"], dtype=np.float64)
    if feats.ndim != 2 or pred.shape != (feats.shape[0], 1):
        raise ValidationError(f"{where}: features/predicted_targets shapes {feats.shape}, {pred.shape}")
    echo = d.get("config_echo") or {}
    task_cfg = echo.get("task", echo)
    history = list(d["loss_history"])
    return GenerationResult(
        features=feats,
        predicted_targets=pred,
        loss_history=history,
        epochs_run=int(d.get("epochs_run", len(history))),
        stop_reason=d["stop_reason"],
        best_epoch=int(d.get("best_epoch", 0)),
        best_loss=float(d.get("best_loss", min(history) if history else float("nan"))),
        true_targets=None if d.get("true_targets") is None else np.array(d["true_targets"]),
        residuals=None if d.get("residuals") is None else np.array(d["residuals"]),
        config=task_cfg,
    )


def save_result(result: GenerationResult, path, config_echo: dict = None) -> None:
    Path(path).write_text(json.dumps(result_to_dict(result, config_echo), indent=1) + "\n")


def load_result(path) -> GenerationResult:
    return result_from_dict(nn.load_json(path), where=str(path))
