"""A from-scratch tiny MLP with a single sigmoid output.

Layout conventions shared with the Monte-Carlo kernels:

* weights of layer ``l`` are a ``(fan_out, fan_in)`` matrix; random draws fill
  them layer by layer in row-major order from one per-trial stream
  (see :mod:`losslab.rng`), biases start at zero and consume no draws;
* flattened parameter vectors (gradients, ensembles) are layer-major, the
  weight matrix row-major first and then the bias vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import rng
from .errors import DomainError, TrainingDiverged

EPS = 1e-7
ACTIVATIONS = ("relu", "tanh")
INIT_SCHEMES = ("he_normal", "he_uniform", "xavier_normal", "plain_normal", "plain_uniform")


@dataclass(frozen=True)
class NetworkSpec:
    input_dim: int
    hidden_width: int
    hidden_depth: int
    activation: str = "relu"
    init_scheme: str = "he_normal"
    init_scale: float = 1.0

    def __post_init__(self):
        for name in ("input_dim", "hidden_width"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
        if int(self.hidden_depth) != self.hidden_depth or self.hidden_depth < 0:
            raise DomainError(f"hidden_depth must be a non-negative integer, got {self.hidden_depth!r}")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.init_scheme not in INIT_SCHEMES:
            raise DomainError(f"init_scheme must be one of {INIT_SCHEMES}, got {self.init_scheme!r}")
        if self.init_scheme.startswith("plain_") and not (
            math.isfinite(self.init_scale) and self.init_scale > 0
        ):
            raise DomainError(f"init_scale must be positive, got {self.init_scale!r}")

    @property
    def layer_dims(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_depth + [1]

    @property
    def uniform_init(self) -> bool:
        return self.init_scheme in ("he_uniform", "plain_uniform")

    def layer_scales(self) -> np.ndarray:
        """Per-layer std (normal schemes) or half-range (uniform schemes)."""
        dims = self.layer_dims
        out = []
        for fi, fo in zip(dims[:-1], dims[1:]):
            if self.init_scheme == "he_normal":
                out.append(math.sqrt(2.0 / fi))
            elif self.init_scheme == "he_uniform":
                out.append(math.sqrt(6.0 / fi))
            elif self.init_scheme == "xavier_normal":
                out.append(math.sqrt(2.0 / (fi + fo)))
            else:
                out.append(float(self.init_scale))
        return np.array(out)


def param_count(spec: NetworkSpec) -> int:
    dims = spec.layer_dims
    return sum(fi * fo + fo for fi, fo in zip(dims[:-1], dims[1:]))


@dataclass(frozen=True)
class WeightSet:
    """Concrete layer parameters: ``layers[l] = (W (fan_out x fan_in), b (fan_out,))``."""

    layers: tuple
    activation: str = "relu"

    def __post_init__(self):
        prev = None
        for W, b in self.layers:
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise DomainError("each layer needs W of shape (fan_out, fan_in) and b of shape (fan_out,)")
            if prev is not None and W.shape[1] != prev:
                raise DomainError(f"layer fan_in {W.shape[1]} does not chain with previous fan_out {prev}")
            prev = W.shape[0]
            W.flags.writeable = False
            b.flags.writeable = False
        if prev != 1:
            raise DomainError("the last layer must have a single output")

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[1]

    @property
    def n_params(self) -> int:
        return sum(W.size + b.size for W, b in self.layers)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in self.layers])

    def with_flat(self, theta: np.ndarray) -> "WeightSet":
        layers, off = [], 0
        for W, b in self.layers:
            nW = W.size
            newW = np.array(theta[off:off + nW], dtype=np.float64).reshape(W.shape)
            off += nW
            newb = np.array(theta[off:off + b.size], dtype=np.float64)
            off += b.size
            layers.append((newW, newb))
        return WeightSet(tuple(layers), self.activation)

    def is_finite(self) -> bool:
        return all(np.isfinite(W).all() and np.isfinite(b).all() for W, b in self.layers)


@dataclass(frozen=True)
class EncodedSample:
    features: np.ndarray
    label: int


@dataclass(frozen=True)
class Dataset:
    """Encoded design matrix ``X`` (n x d) and binary labels ``y`` (n,)."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise DomainError("X must be (n, d) and y must be (n,)")

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.X[idx], self.y[idx], self.feature_names)

    def samples(self) -> list[EncodedSample]:
        return [EncodedSample(self.X[i].copy(), int(self.y[i])) for i in range(len(self))]

    @classmethod
    def from_samples(cls, samples: Sequence[EncodedSample]) -> "Dataset":
        if len(samples) == 0:
            raise DomainError("sample list is empty")
        X = np.array([s.features for s in samples], dtype=np.float64)
        y = np.array([s.label for s in samples], dtype=np.float64)
        return cls(X, y)


def _as_dataset(data) -> Dataset:
    if isinstance(data, Dataset):
        if len(data) == 0:
            raise DomainError("sample list is empty")
        return data
    if isinstance(data, EncodedSample):
        return Dataset.from_samples([data])
    return Dataset.from_samples(list(data))


def init_weights(spec: NetworkSpec, trial_seed: int) -> WeightSet:
    """Draw a weight set from the spec's init scheme; biases are zero."""
    dims = spec.layer_dims
    n_w = sum(fi * fo for fi, fo in zip(dims[:-1], dims[1:]))
    if spec.uniform_init:
        raw = 2.0 * rng.uniforms(trial_seed, 0, n_w)[0] - 1.0
    else:
        raw = rng.normals(trial_seed, 0, n_w)[0]
    layers, off = [], 0
    for (fi, fo), scale in zip(zip(dims[:-1], dims[1:]), spec.layer_scales()):
        W = raw[off:off + fi * fo].reshape(fo, fi) * scale
        off += fi * fo
        layers.append((W, np.zeros(fo)))
    return WeightSet(tuple(layers), spec.activation)


def _act(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _forward_batch(weights: WeightSet, X: np.ndarray):
    """Return (pre-activations, activations, raw sigmoid output) for rows of ``X``."""
    if X.shape[1] != weights.input_dim:
        raise DomainError(f"feature length {X.shape[1]} does not match input_dim {weights.input_dim}")
    acts = [X]
    pres = []
    h = X
    last = len(weights.layers) - 1
    for i, (W, b) in enumerate(weights.layers):
        z = h @ W.T + b
        pres.append(z)
        h = z if i == last else _act(z, weights.activation)
        acts.append(h)
    with np.errstate(over="ignore"):
        p = 1.0 / (1.0 + np.exp(-h[:, 0]))
    return pres, acts, p


def predict(weights: WeightSet, X: np.ndarray) -> np.ndarray:
    """Clamped sigmoid outputs for each row of ``X``."""
    _, _, p = _forward_batch(weights, np.atleast_2d(np.asarray(X, dtype=np.float64)))
    return np.clip(p, EPS, 1.0 - EPS)


def forward(weights: WeightSet, features) -> float:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError("forward expects a single feature vector")
    return float(predict(weights, x[None, :])[0])


def bce_loss(prob, label):
    """Binary cross-entropy of a (clamped) probability against a 0/1 label."""
    p = np.clip(prob, EPS, 1.0 - EPS)
    out = -(label * np.log(p) + (1.0 - label) * np.log(1.0 - p))
    return float(out) if np.ndim(out) == 0 else out


def mean_loss(weights: WeightSet, samples) -> float:
    data = _as_dataset(samples)
    return float(np.mean(bce_loss(predict(weights, data.X), data.y)))


def gradient(weights: WeightSet, batch) -> np.ndarray:
    """Analytic gradient of :func:`mean_loss` over ``batch``, flattened.

    The sigmoid clamp is part of the loss: a clamped output contributes zero
    gradient.  ReLU'(0) is taken as 0.
    """
    data = _as_dataset(batch)
    pres, acts, p = _forward_batch(weights, data.X)
    n = len(data)
    inside = (p > EPS) & (p < 1.0 - EPS)
    delta = ((p - data.y) * inside / n)[:, None]
    grads = [None] * len(weights.layers)
    for i in range(len(weights.layers) - 1, -1, -1):
        W, _ = weights.layers[i]
        grads[i] = (delta.T @ acts[i], delta.sum(axis=0))
        if i > 0:
            back = delta @ W
            if weights.activation == "relu":
                delta = back * (pres[i - 1] > 0.0)
            else:
                delta = back * (1.0 - acts[i] ** 2)
    return np.concatenate([np.concatenate([gW.ravel(), gb]) for gW, gb in grads])


@dataclass
class TrainRun:
    epoch_losses: list
    snapshots: list  # (epoch, WeightSet); epoch 0 is the initial point
    initial_loss: float
    lr: float
    batch_size: int
    seed: int
    final_weights: WeightSet = field(repr=False, default=None)

    @property
    def best_loss(self) -> float:
        return min(self.epoch_losses)


def train(
    spec: NetworkSpec,
    data,
    lr: float,
    epochs: int,
    batch_size: int,
    seed: int,
    snapshot_every: int = 1,
    init: WeightSet | None = None,
    callback=None,
) -> TrainRun:
    """Plain constant-rate SGD, no momentum, reshuffled minibatches each epoch.

    ``epoch_losses[e]`` is the full-data mean loss after epoch ``e + 1``.
    Snapshots are taken at epoch 0, every ``snapshot_every`` epochs and at the
    final epoch.  ``callback(epoch, weights)`` runs after each epoch.
    """
    data = _as_dataset(data)
    if not (math.isfinite(lr) and lr >= 0):
        raise DomainError(f"lr must be finite and non-negative, got {lr!r}")
    if epochs < 1 or snapshot_every < 1:
        raise DomainError("epochs and snapshot_every must be positive")
    if not 1 <= batch_size <= len(data):
        raise DomainError(f"batch_size must be in [1, {len(data)}], got {batch_size}")
    weights = init if init is not None else init_weights(spec, seed)
    if weights.input_dim != data.X.shape[1]:
        raise DomainError(f"data has {data.X.shape[1]} features, network expects {weights.input_dim}")
    shuffler = np.random.default_rng(seed)
    initial = mean_loss(weights, data)
    snapshots = [(0, weights)]
    losses: list[float] = []
    theta = weights.flat()
    n = len(data)
    for epoch in range(1, epochs + 1):
        order = shuffler.permutation(n)
        for lo in range(0, n, batch_size):
            g = gradient(weights, data.subset(order[lo:lo + batch_size]))
            theta = theta - lr * g
            weights = weights.with_flat(theta)
        loss = mean_loss(weights, data) if weights.is_finite() else float("nan")
        if not math.isfinite(loss):
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch, weights, losses)
        losses.append(loss)
        if epoch % snapshot_every == 0 or epoch == epochs:
            snapshots.append((epoch, weights))
        if callback is not None:
            callback(epoch, weights)
    return TrainRun(losses, snapshots, initial, lr, batch_size, seed, weights)
