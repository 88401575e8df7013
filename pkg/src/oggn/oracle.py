"""Oracles map feature vectors to a scalar target and expose the input gradient.

Three kinds share one interface:

* ``neural``: a trained network wrapped in feature/target standardization,
* ``analytic``: a polynomial-exponential function evaluated directly,
* ``residual_norm``: ``sqrt(sum_k f_k(x)**2)`` over an equation system,
  which is zero exactly at a common root.
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConfigError, ParseError, ShapeError, TrainingDivergedError, ValidationError
from .poly import (
    PolyFunction,
    PolySystem,
    function_to_dict,
    poly_eval,
    poly_grad,
    system_from_dict,
    system_residuals,
    system_to_dict,
    _terms_from,
)
from .seeding import rng_for

log = logging.getLogger(__name__)

RESIDUAL_EPS = 1e-12
FORMAT_VERSION = 1


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 1)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {self.features.shape}")
        if self.features.shape[0] != self.targets.shape[0]:
            raise ShapeError(
                f"{self.features.shape[0]} feature rows but {self.targets.shape[0]} targets"
            )

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def synth_dataset(f, n: int, low: float, high: float, seed: int = 0, function_id: str = None) -> Dataset:
    """Sample ``n`` points uniformly in ``[low, high)^d`` and label them with ``f``.

    ``f`` is a ``PolyFunction`` or a ``PolySystem`` (labelled by residual norm).
    """
    if n < 0:
        raise ConfigError(f"n must be non-negative, got {n}")
    if not low < high:
        raise ConfigError(f"empty sampling range [{low}, {high})")
    if f.fractional_vars() and low < 0:
        raise ConfigError(f"range starts at {low} < 0 but the function has fractional exponents")
    rng = rng_for(seed, "data")
    x = rng.uniform(low, high, size=(n, f.n_vars))
    if isinstance(f, PolySystem):
        y = np.sqrt(np.sum(system_residuals(f, x) ** 2, axis=1)) if n else np.zeros(0)
    else:
        y = poly_eval(f, x) if n else np.zeros(0)
    meta = {"function": function_id, "low": low, "high": high, "seed": seed, "n": n}
    return Dataset(x, y, meta)


def save_dataset_csv(data: Dataset, path) -> None:
    d = data.n_features
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i + 1}" for i in range(d)] + ["y"])
        for row, y in zip(data.features, data.targets[:, 0]):
            w.writerow(["%.17g" % v for v in row] + ["%.17g" % y])


def load_dataset_csv(path) -> Dataset:
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1].strip() != "y" or len(header) < 2:
            raise ParseError(f"{path}:1: header must be x1,...,xd,y")
        expected = [f"x{i + 1}" for i in range(len(header) - 1)]
        if [h.strip() for h in header[:-1]] != expected:
            raise ParseError(f"{path}:1: header must be {','.join(expected)},y")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(v) for v in row]
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if not all(np.isfinite(vals)):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    arr = np.array(rows, dtype=np.float64).reshape(-1, len(header))
    return Dataset(arr[:, :-1], arr[:, -1], {"source": str(path)})


@dataclass
class OracleModel:
    kind: str
    input_dim: int
    network: nn.Network = None
    feature_means: np.ndarray = None
    feature_scales: np.ndarray = None
    target_mean: float = 0.0
    target_scale: float = 1.0
    function: PolyFunction = None
    system: PolySystem = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "neural":
            if self.network is None:
                raise ValidationError("neural oracle needs a network")
            self.feature_means = np.asarray(self.feature_means, dtype=np.float64)
            self.feature_scales = np.asarray(self.feature_scales, dtype=np.float64)
            if self.network.input_dim != self.input_dim or self.network.output_dim != 1:
                raise ValidationError(
                    f"network maps {self.network.input_dim} -> {self.network.output_dim}, "
                    f"oracle needs {self.input_dim} -> 1"
                )
            if self.feature_means.shape != (self.input_dim,) or self.feature_scales.shape != (self.input_dim,):
                raise ValidationError("normalization vectors do not match input_dim")
            if np.any(self.feature_scales <= 0) or not self.target_scale > 0:
                raise ValidationError("normalization scales must be positive")
        elif self.kind == "analytic":
            if self.function is None or self.function.n_vars != self.input_dim:
                raise ValidationError("analytic oracle needs a function over input_dim variables")
        elif self.kind == "residual_norm":
            if self.system is None or self.system.n_vars != self.input_dim:
                raise ValidationError("residual oracle needs a system over input_dim variables")
        else:
            raise ValidationError(f"unknown oracle kind {self.kind!r}")

    @classmethod
    def analytic(cls, f: PolyFunction) -> "OracleModel":
        return cls("analytic", f.n_vars, function=f)

    @classmethod
    def residual_norm(cls, system: PolySystem) -> "OracleModel":
        return cls("residual_norm", system.n_vars, system=system)

    def normalize(self, x):
        return (np.asarray(x, dtype=np.float64) - self.feature_means) / self.feature_scales

    def denormalize(self, z):
        return np.asarray(z, dtype=np.float64) * self.feature_scales + self.feature_means

    def fractional_vars(self) -> set:
        if self.kind == "analytic":
            return self.function.fractional_vars()
        if self.kind == "residual_norm":
            return self.system.fractional_vars()
        return set()


def _features(o, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != o.input_dim:
        raise ShapeError(f"oracle takes {o.input_dim} features, got shape {x.shape}")
    return x


def oracle_value(o: OracleModel, features) -> np.ndarray:
    """Oracle output, shape ``(n, 1)``."""
    x = _features(o, features)
    if o.kind == "neural":
        out = nn.predict(o.network, o.normalize(x))
        return out * o.target_scale + o.target_mean
    if o.kind == "analytic":
        return poly_eval(o.function, x).reshape(-1, 1)
    r = system_residuals(o.system, x)
    return np.sqrt(np.sum(r * r, axis=1)).reshape(-1, 1)


def oracle_value_and_grad(o: OracleModel, features) -> tuple:
    """Oracle output ``(n, 1)`` and its gradient with respect to the features ``(n, d)``."""
    x = _features(o, features)
    if o.kind == "neural":
        out, cache = nn.forward(o.network, o.normalize(x))
        _, d_in = nn.backward(o.network, cache, np.full_like(out, o.target_scale))
        return out * o.target_scale + o.target_mean, d_in / o.feature_scales
    if o.kind == "analytic":
        return poly_eval(o.function, x).reshape(-1, 1), poly_grad(o.function, x)
    r = system_residuals(o.system, x)
    norm = np.sqrt(np.sum(r * r, axis=1))
    grad = np.zeros_like(x)
    for k, eq in enumerate(o.system.equations):
        grad += r[:, k : k + 1] * poly_grad(eq, x)
    grad /= np.maximum(norm, RESIDUAL_EPS)[:, None]
    return norm.reshape(-1, 1), grad


def evaluate_oracle(o: OracleModel, data: Dataset) -> dict:
    pred = oracle_value(o, data.features)
    err = pred - data.targets
    rel = np.abs(err) / np.maximum(np.abs(data.targets), 1e-12)
    return {
        "n": len(data),
        "mse": float(np.mean(err**2)) if len(data) else 0.0,
        "mean_rel_error": float(np.mean(rel)) if len(data) else 0.0,
        "max_rel_error": float(np.max(rel)) if len(data) else 0.0,
    }


def train_oracle(
    data: Dataset,
    hidden=(64, 64),
    activation: str = "tanh",
    epochs: int = 200,
    batch_size: int = 128,
    lr: float = 1e-3,
    seed: int = 0,
    validation: Dataset = None,
) -> OracleModel:
    """Fit a standardized MLP regressor to ``data`` with mini-batch Adam on MSE."""
    if len(data) == 0:
        raise ConfigError("cannot train an oracle on an empty dataset")
    if epochs < 1 or batch_size < 1:
        raise ConfigError("epochs and batch_size must be positive")
    x, y = data.features, data.targets
    means = x.mean(axis=0)
    scales = x.std(axis=0)
    scales[scales == 0] = 1.0
    t_mean = float(y.mean())
    # zero spread: every standardized target is 0, so a tiny scale makes the
    # network's leftover output irrelevant
    t_scale = float(y.std()) or 1e-6 * max(1.0, abs(t_mean))
    xn = (x - means) / scales
    yn = (y - t_mean) / t_scale

    sizes = [data.n_features, *hidden, 1]
    acts = [activation] * len(hidden) + ["identity"]
    init_rng = rng_for(seed, "init")
    net = nn.init_network(sizes, acts, seed=int(init_rng.integers(0, 2**31 - 1)))
    state = nn.AdamState.for_network(net, lr=lr)
    shuffle_rng = rng_for(seed, "shuffle")
    n = len(data)
    for epoch in range(1, epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            out, cache = nn.forward(net, xn[idx])
            loss, d_out = nn.mse_loss(out, yn[idx])
            grads, _ = nn.backward(net, cache, d_out)
            nn.adam_step(net, grads, state)
            total += loss * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise TrainingDivergedError(f"oracle training diverged at epoch {epoch}", epoch=epoch)
        if epoch % 50 == 0 or epoch == epochs:
            log.info("oracle epoch %d: normalized train mse %.3e", epoch, epoch_loss)

    model = OracleModel(
        "neural", data.n_features, network=net,
        feature_means=means, feature_scales=scales,
        target_mean=t_mean, target_scale=t_scale,
    )
    model.metadata = {
        "train": evaluate_oracle(model, data),
        "validation": evaluate_oracle(model, validation) if validation is not None else None,
        "config": {
            "hidden": list(hidden), "activation": activation, "epochs": epochs,
            "batch_size": batch_size, "lr": lr, "seed": seed,
        },
    }
    return model


def oracle_to_dict(o: OracleModel) -> dict:
    d = {"format_version": FORMAT_VERSION, "kind": o.kind, "input_dim": o.input_dim}
    if o.kind == "neural":
        d.update(
            network=nn.network_to_dict(o.network),
            feature_means=o.feature_means.tolist(),
            feature_scales=o.feature_scales.tolist(),
            target_mean=o.target_mean,
            target_scale=o.target_scale,
        )
    elif o.kind == "analytic":
        d["function"] = function_to_dict(o.function)
    else:
        d["system"] = system_to_dict(o.system)
    d["metadata"] = o.metadata
    return d


def oracle_from_dict(d: dict, where: str = "oracle") -> OracleModel:
    if not isinstance(d, dict) or "kind" not in d or "input_dim" not in d:
        raise ValidationError(f"{where}: missing field 'kind' or 'input_dim'")
    if d.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise ValidationError(f"{where}: unsupported format_version {d.get('format_version')!r}")
    kind, dim = d["kind"], int(d["input_dim"])
    meta = d.get("metadata") or {}
    if kind == "neural":
        for key in ("network", "feature_means", "feature_scales", "target_mean", "target_scale"):
            if key not in d:
                raise ValidationError(f"{where}: missing field {key!r}")
        net = nn.network_from_dict(d["network"], where=f"{where}.network")
        return OracleModel(
            "neural", dim, network=net,
            feature_means=d["feature_means"], feature_scales=d["feature_scales"],
            target_mean=float(d["target_mean"]), target_scale=float(d["target_scale"]),
            metadata=meta,
        )
    if kind == "analytic":
        terms = _terms_from(d.get("function"), f"{where}.function")
        return OracleModel("analytic", dim, function=PolyFunction(dim, terms), metadata=meta)
    if kind == "residual_norm":
        system = system_from_dict(d.get("system"), where=f"{where}.system")
        return OracleModel("residual_norm", dim, system=system, metadata=meta)
    raise ValidationError(f"{where}: unknown oracle kind {kind!r}")


def save_oracle(o: OracleModel, path) -> None:
    Path(path).write_text(json.dumps(oracle_to_dict(o), indent=1) + "\n")


def load_oracle(path) -> OracleModel:
    return oracle_from_dict(nn.load_json(path), where=str(path))
