"""Small dense feed-forward networks in numpy.

Rows are samples. Everything is float64. Only the fixed MLP topology is
differentiated, which is all the generator and oracle need; ``backward``
always returns the gradient with respect to the input as well, since that
is the path loss takes through a frozen oracle.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError, ShapeError, ValidationError

ACTIVATIONS = ("relu", "tanh", "identity")
FORMAT_VERSION = 1


@dataclass
class Network:
    layer_sizes: list
    weights: list
    biases: list
    activations: list
    seed: int = 0

    def __post_init__(self):
        validate_network(self)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_dim(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "Network":
        return Network(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
            self.seed,
        )

    def parameters(self) -> list:
        """Flat list of parameter arrays: all weights, then all biases."""
        return [*self.weights, *self.biases]


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre: list = field(default_factory=list)
    post: list = field(default_factory=list)


def validate_network(net: Network) -> None:
    sizes = list(net.layer_sizes)
    if len(sizes) < 2 or any(int(s) < 1 for s in sizes):
        raise ShapeError(f"need at least two positive layer sizes, got {sizes}")
    n = len(sizes) - 1
    if len(net.weights) != n or len(net.biases) != n or len(net.activations) != n:
        raise ShapeError(
            f"{n} layers expected: got {len(net.weights)} weights, "
            f"{len(net.biases)} biases, {len(net.activations)} activations"
        )
    for l in range(n):
        if net.weights[l].shape != (sizes[l], sizes[l + 1]):
            raise ShapeError(
                f"layer {l}: weight shape {net.weights[l].shape}, "
                f"expected {(sizes[l], sizes[l + 1])}"
            )
        if net.biases[l].shape != (sizes[l + 1],):
            raise ShapeError(
                f"layer {l}: bias shape {net.biases[l].shape}, expected {(sizes[l + 1],)}"
            )
        if net.activations[l] not in ACTIVATIONS:
            raise ConfigError(f"layer {l}: unknown activation {net.activations[l]!r}")


def init_network(layer_sizes, activations, seed: int = 0) -> Network:
    """Glorot-uniform weights, zero biases, reproducible from ``seed``."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ShapeError(f"need at least two positive layer sizes, got {list(layer_sizes)}")
    if isinstance(activations, str):
        activations = [activations] * (len(sizes) - 1)
    activations = list(activations)
    if len(activations) != len(sizes) - 1:
        raise ShapeError(
            f"{len(sizes) - 1} activations expected, got {len(activations)}"
        )
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(sizes, weights, biases, activations, int(seed))


def _activate(tag, z):
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(tag, z, a):
    if tag == "relu":
        return (z > 0).astype(z.dtype)
    if tag == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


def _as_batch(x, width, what="input"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != width:
        raise ShapeError(f"{what} has shape {x.shape}, expected (n, {width})")
    return x


def forward(net: Network, x) -> tuple:
    """Run a batch through ``net``; returns ``(output, cache)``."""
    h = _as_batch(x, net.input_dim)
    cache = ForwardCache(inputs=h)
    for W, b, tag in zip(net.weights, net.biases, net.activations):
        z = h @ W + b
        h = _activate(tag, z)
        cache.pre.append(z)
        cache.post.append(h)
    return h, cache


def predict(net: Network, x) -> np.ndarray:
    return forward(net, x)[0]


def backward(net: Network, cache: ForwardCache, d_output) -> tuple:
    """Backpropagate ``d_output`` through the cached forward pass.

    Returns ``((weight_grads, bias_grads), d_input)``.
    """
    if len(cache.pre) != net.n_layers:
        raise ShapeError(f"cache holds {len(cache.pre)} layers, network has {net.n_layers}")
    out = cache.post[-1]
    delta = np.asarray(d_output, dtype=np.float64)
    if delta.shape != out.shape:
        raise ShapeError(f"d_output shape {delta.shape} != forward output shape {out.shape}")
    d_w = [None] * net.n_layers
    d_b = [None] * net.n_layers
    for l in reversed(range(net.n_layers)):
        delta = delta * _activation_grad(net.activations[l], cache.pre[l], cache.post[l])
        h_in = cache.inputs if l == 0 else cache.post[l - 1]
        d_w[l] = h_in.T @ delta
        d_b[l] = delta.sum(axis=0)
        delta = delta @ net.weights[l].T
    return (d_w, d_b), delta


def mse_loss(pred, target) -> tuple:
    """Mean squared error and its gradient with respect to ``pred``."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred shape {pred.shape} != target shape {target.shape}")
    diff = pred - target
    n = diff.size
    if n == 0:
        return 0.0, np.zeros_like(diff)
    return float(np.mean(diff * diff)), 2.0 * diff / n


def _check_grads(net, grads):
    d_w, d_b = grads
    if len(d_w) != net.n_layers or len(d_b) != net.n_layers:
        raise ShapeError("gradient layer count does not match network")
    for p, g in zip(net.parameters(), [*d_w, *d_b]):
        if np.shape(g) != p.shape:
            raise ShapeError(f"gradient shape {np.shape(g)} != parameter shape {p.shape}")


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = None
    v: list = None

    @classmethod
    def for_network(cls, net: Network, **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = [np.zeros_like(p) for p in net.parameters()]
        state.v = [np.zeros_like(p) for p in net.parameters()]
        return state

    def copy(self) -> "AdamState":
        return AdamState(
            self.lr, self.beta1, self.beta2, self.eps, self.step,
            [a.copy() for a in self.m], [a.copy() for a in self.v],
        )


def adam_step(net: Network, grads, state: AdamState) -> tuple:
    """Bias-corrected Adam update, applied in place. Returns ``(net, state)``."""
    _check_grads(net, grads)
    params = net.parameters()
    if state.m is None:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if [m.shape for m in state.m] != [p.shape for p in params]:
        raise ShapeError("Adam moment shapes do not match network parameters")
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, [*grads[0], *grads[1]], state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return net, state


def sgd_step(net: Network, grads, lr: float = 1e-2) -> Network:
    _check_grads(net, grads)
    for p, g in zip(net.parameters(), [*grads[0], *grads[1]]):
        p -= lr * g
    return net


def grad_check(net: Network, x, eps: float = 1e-4, target=None, floor: float = 1e-6) -> float:
    """Largest relative gap between ``backward`` and central differences.

    The scalar being differentiated is ``mse_loss(forward(net, x), target)``
    with a zero target by default. Both parameter and input gradients are
    compared; the relative error uses ``max(|a|, |n|, floor)`` as denominator.
    """
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    x = _as_batch(x, net.input_dim).copy()
    out, cache = forward(net, x)
    if target is None:
        target = np.zeros_like(out)
    _, d_out = mse_loss(out, target)
    (d_w, d_b), d_x = backward(net, cache, d_out)

    def loss():
        return mse_loss(forward(net, x)[0], target)[0]

    worst = 0.0
    for arr, analytic in zip([*net.weights, *net.biases, x], [*d_w, *d_b, d_x]):
        flat = arr.reshape(-1)
        ana = analytic.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = loss()
            flat[i] = keep - eps
            down = loss()
            flat[i] = keep
            num = (up - down) / (2.0 * eps)
            denom = max(abs(ana[i]), abs(num), floor)
            worst = max(worst, abs(ana[i] - num) / denom)
    return worst


def network_to_dict(net: Network) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "layer_sizes": [int(s) for s in net.layer_sizes],
        "activations": list(net.activations),
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "seed": int(net.seed),
    }


def network_from_dict(d: dict, where: str = "network") -> Network:
    if not isinstance(d, dict):
        raise ValidationError(f"{where}: expected an object, got {type(d).__name__}")
    for key in ("layer_sizes", "activations", "weights", "biases", "seed"):
        if key not in d:
            raise ValidationError(f"{where}: missing field {key!r}")
    version = d.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise ValidationError(f"{where}: unsupported format_version {version!r}")
    try:
        weights = [np.array(w, dtype=np.float64) for w in d["weights"]]
        biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: non-numeric weights or biases ({exc})") from exc
    for l, w in enumerate(weights):
        if w.ndim != 2:
            raise ValidationError(f"{where}: weights[{l}] is not a matrix (shape {w.shape})")
    try:
        return Network(list(d["layer_sizes"]), weights, biases, list(d["activations"]), int(d["seed"]))
    except (ShapeError, ConfigError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def load_json(path) -> dict:
    """Read a JSON file, turning decode failures into ``ParseError`` with position."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=1) + "\n")


def load_network(path) -> Network:
    return network_from_dict(load_json(path), where=str(path))
