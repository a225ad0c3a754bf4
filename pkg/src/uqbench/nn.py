"""Minimal dense feed-forward network engine with manual backpropagation.

Just enough machinery for the 1D benchmark: dense layers with relu /
identity / sigmoid activations, inverted dropout after hidden activations,
plain SGD with decoupled weight decay and per-group rates, a finite-difference
gradient checker, and an exact binary checkpoint format. Training is
single-threaded and bit-deterministic for a fixed seed; trained networks are
immutable.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ACTIVATIONS",
    "DenseLayer",
    "MLP",
    "TrainConfig",
    "ForwardCache",
    "init_mlp",
    "forward",
    "backward",
    "sgd_step",
    "grad_check",
    "parameter_checksum",
    "save_mlp",
    "load_mlp",
]

ACTIVATIONS = ("relu", "identity", "sigmoid")


def _readonly(arr, dtype=np.float64):
    arr = np.ascontiguousarray(np.asarray(arr, dtype=dtype))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DenseLayer:
    """out x in weight matrix plus biases; `group` selects SGD hyperparameters."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "identity"
    group: str = "default"

    def __post_init__(self):
        w = _readonly(self.weights)
        b = _readonly(self.biases)
        if w.ndim != 2 or b.ndim != 1 or b.size != w.shape[0]:
            raise ValueError(f"inconsistent layer shapes: {w.shape}, {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("layer parameters must be finite")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def out_size(self) -> int:
        return self.weights.shape[0]

    @property
    def in_size(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class MLP:
    layers: tuple[DenseLayer, ...]
    dropout_rate: float = 0.0

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.out_size != b.in_size:
                raise ValueError(
                    f"layer shapes do not chain: {a.out_size} -> {b.in_size}"
                )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {self.dropout_rate}")
        object.__setattr__(self, "layers", layers)

    @property
    def in_size(self) -> int:
        return self.layers[0].in_size

    @property
    def out_size(self) -> int:
        return self.layers[-1].out_size


@dataclass(frozen=True)
class TrainConfig:
    """SGD settings; rates may be a dict keyed by layer group."""

    learning_rate: float | dict
    weight_decay: float | dict = 0.0
    batch_size: int = 50
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        for lr in self._values(self.learning_rate):
            if not lr > 0:
                raise ValueError(f"learning rate must be positive, got {lr}")
        for wd in self._values(self.weight_decay):
            if wd < 0:
                raise ValueError(f"weight decay must be nonnegative, got {wd}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")

    @staticmethod
    def _values(v):
        return v.values() if isinstance(v, dict) else [v]


def _resolve(value, group: str) -> float:
    if isinstance(value, dict):
        if group not in value:
            raise KeyError(f"no rate configured for parameter group {group!r}")
        return float(value[group])
    return float(value)


def init_mlp(
    sizes,
    activations=None,
    seed: int | np.random.Generator = 0,
    dropout_rate: float = 0.0,
    group: str = "default",
) -> MLP:
    """He-uniform init for relu layers, Xavier-uniform otherwise."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_layers = len(sizes) - 1
    if activations is None:
        activations = ["relu"] * (n_layers - 1) + ["identity"]
    if len(activations) != n_layers:
        raise ValueError("need one activation per layer")
    layers = []
    for i in range(n_layers):
        fan_in, fan_out = sizes[i], sizes[i + 1]
        if activations[i] == "relu":
            limit = np.sqrt(6.0 / fan_in)
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        layers.append(DenseLayer(w, np.zeros(fan_out), activations[i], group))
    return MLP(tuple(layers), dropout_rate)


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "sigmoid":
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    return z


def _activate_grad(z, kind):
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    if kind == "sigmoid":
        s = _activate(z, "sigmoid")
        return s * (1.0 - s)
    return np.ones_like(z)


@dataclass
class ForwardCache:
    inputs: np.ndarray
    pre: list        # pre-activations per layer
    post: list       # post-activation (and post-dropout) outputs per layer
    masks: list      # inverted-dropout masks, None where not applied


def forward(
    net: MLP,
    inputs: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardCache]:
    """Run a batch through the network; returns (output, cache for backward).

    Eval mode is deterministic. Train mode samples inverted-dropout masks
    after each hidden activation when `net.dropout_rate` > 0.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.in_size:
        raise ValueError(f"expected (batch, {net.in_size}) inputs, got {x.shape}")
    p = net.dropout_rate
    use_dropout = mode == "train" and p > 0.0
    if use_dropout and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")
    pre, post, masks = [], [], []
    a = x
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        z = a @ layer.weights.T + layer.biases
        a = _activate(z, layer.activation)
        mask = None
        if use_dropout and i < last:
            mask = (rng.random(z.shape) >= p) / (1.0 - p)
            a = a * mask
        pre.append(z)
        post.append(a)
        masks.append(mask)
    return a, ForwardCache(x, pre, post, masks)


def backward(
    net: MLP,
    cache: ForwardCache,
    output_gradient: np.ndarray,
    inject: dict[int, np.ndarray] | None = None,
):
    """Exact reverse-mode gradients for the cached forward pass.

    Returns (grads, input_gradient) where grads is a list of (dW, db) per
    layer. `inject` adds extra gradient to the post-activation output of the
    given layer index (used when a side network also consumes that layer).
    """
    g = np.asarray(output_gradient, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.post[-1].shape:
        raise ValueError(
            f"output gradient shape {g.shape} != output shape {cache.post[-1].shape}"
        )
    grads: list = [None] * len(net.layers)
    for i in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[i]
        if inject and i in inject:
            g = g + inject[i]
        if cache.masks[i] is not None:
            g = g * cache.masks[i]
        gz = g * _activate_grad(cache.pre[i], layer.activation)
        prev = cache.inputs if i == 0 else cache.post[i - 1]
        grads[i] = (gz.T @ prev, gz.sum(axis=0))
        g = gz @ layer.weights
    return grads, g


def sgd_step(net: MLP, grads, cfg: TrainConfig) -> MLP:
    """w <- w - lr * (grad + weight_decay * w), per parameter group."""
    new_layers = []
    for layer, (dw, db) in zip(net.layers, grads):
        lr = _resolve(cfg.learning_rate, layer.group)
        wd = _resolve(cfg.weight_decay, layer.group)
        w = layer.weights - lr * (dw + wd * layer.weights)
        b = layer.biases - lr * (db + wd * layer.biases)
        new_layers.append(DenseLayer(w, b, layer.activation, layer.group))
    return MLP(tuple(new_layers), net.dropout_rate)


def grad_check(net: MLP, loss, samples, h: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    `loss` maps the network's batch output to (scalar, gradient wrt output).
    Runs in eval mode over every parameter of every layer.
    """
    x = np.asarray(samples, dtype=np.float64)
    out, cache = forward(net, x, mode="eval")
    _, gout = loss(out)
    grads, _ = backward(net, cache, gout)

    # writable copies for the numeric sweep
    params = [(l.weights.copy(), l.biases.copy()) for l in net.layers]
    acts = [l.activation for l in net.layers]

    def run():
        a = x
        for (w, b), act in zip(params, acts):
            a = _activate(a @ w.T + b, act)
        value, _ = loss(a)
        return float(value)

    worst = 0.0
    for li, (w, b) in enumerate(params):
        for arr, analytic in ((w, grads[li][0]), (b, grads[li][1])):
            flat = arr.ravel()
            aflat = analytic.ravel()
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + h
                up = run()
                flat[k] = orig - h
                down = run()
                flat[k] = orig
                numeric = (up - down) / (2.0 * h)
                denom = max(abs(aflat[k]), abs(numeric), 1e-8)
                worst = max(worst, abs(aflat[k] - numeric) / denom)
    return worst


def parameter_checksum(net: MLP) -> str:
    """SHA-256 over all parameter bytes; detects any training side effect."""
    digest = hashlib.sha256()
    for layer in net.layers:
        digest.update(layer.weights.tobytes())
        digest.update(layer.biases.tobytes())
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# checkpoint format: magic, version, dropout, layer count, then per layer the
# activation/group labels, shape, and little-endian float64 parameters.

_MAGIC = b"UQNN"
_VERSION = 1


def save_mlp(net: MLP, path):
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<d", net.dropout_rate))
        fh.write(struct.pack("<I", len(net.layers)))
        for layer in net.layers:
            act = layer.activation.encode()
            grp = layer.group.encode()
            fh.write(struct.pack("<B", len(act)))
            fh.write(act)
            fh.write(struct.pack("<B", len(grp)))
            fh.write(grp)
            fh.write(struct.pack("<II", layer.out_size, layer.in_size))
            fh.write(np.ascontiguousarray(layer.weights, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(layer.biases, dtype="<f8").tobytes())


def load_mlp(path) -> MLP:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise ValueError(f"not a network checkpoint: bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (dropout,) = struct.unpack_from("<d", data, 8)
    (n_layers,) = struct.unpack_from("<I", data, 16)
    offset = 20
    layers = []
    for _ in range(n_layers):
        (alen,) = struct.unpack_from("<B", data, offset)
        offset += 1
        act = data[offset : offset + alen].decode()
        offset += alen
        (glen,) = struct.unpack_from("<B", data, offset)
        offset += 1
        grp = data[offset : offset + glen].decode()
        offset += glen
        out_size, in_size = struct.unpack_from("<II", data, offset)
        offset += 8
        n = out_size * in_size
        w = np.frombuffer(data, dtype="<f8", count=n, offset=offset).reshape(
            out_size, in_size
        )
        offset += 8 * n
        b = np.frombuffer(data, dtype="<f8", count=out_size, offset=offset)
        offset += 8 * out_size
        layers.append(DenseLayer(w, b, act, grp))
    return MLP(tuple(layers), dropout)
