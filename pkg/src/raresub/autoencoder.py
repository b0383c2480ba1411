"""Feed-forward autoencoder in float64 numpy: init, backprop, Adam, early stopping.

Layer stack (``D`` = input dim, ``L`` = latent dim)::

    encoder: D -> H1 (ReLU, dropout) -> H2 (ReLU) -> L (linear)
    decoder: L -> H2 (ReLU) -> H1 (ReLU) -> D (linear)

with ``H1 = min(1024, max(256, D // 2))`` and ``H2 = min(512, max(128, D // 4))``.

The optimised objective is the per-entry reconstruction MSE plus a coupled L2
penalty ``(weight_decay / 2) * sum(theta ** 2)`` over all parameters, i.e. Adam
sees ``grad + weight_decay * theta``.
"""

from __future__ import annotations

import base64
import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvalidDims, NonFiniteLoss, ShapeMismatch, TooFewSamples

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# activation applied after each of the six dense layers
_ACTIVATIONS = ("relu", "relu", "linear", "relu", "relu", "linear")
N_ENCODER_LAYERS = 3


def hidden_sizes(input_dim: int) -> tuple[int, int]:
    h1 = min(1024, max(256, input_dim // 2))
    h2 = min(512, max(128, input_dim // 4))
    return h1, h2


@dataclass
class AeConfig:
    input_dim: int
    latent_dim: int = 128
    dropout_p: float = 0.1
    learning_rate: float = 1e-3
    weight_decay: float = 1e-5
    batch_size: int = 256
    val_fraction: float = 0.15
    patience: int = 15
    max_epochs: int = 500
    seed: int = 0
    # Replaces the (H1, H2) sizing rule. Only meant for tiny test networks.
    hidden_override: Optional[tuple[int, int]] = None

    def __post_init__(self):
        if self.hidden_override is not None:
            self.hidden_override = tuple(int(h) for h in self.hidden_override)

    @property
    def hidden(self) -> tuple[int, int]:
        if self.hidden_override is not None:
            return self.hidden_override
        return hidden_sizes(self.input_dim)

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        h1, h2 = self.hidden
        d, lat = self.input_dim, self.latent_dim
        return [(d, h1), (h1, h2), (h2, lat), (lat, h2), (h2, h1), (h1, d)]

    def validate(self) -> None:
        if self.input_dim < 1 or self.latent_dim < 1:
            raise InvalidDims("input_dim and latent_dim must be positive")
        h1, h2 = self.hidden
        if not h1 >= h2 >= self.latent_dim:
            raise InvalidDims(f"need H1 >= H2 >= latent_dim, got {h1}, {h2}, {self.latent_dim}")
        if not 0 <= self.dropout_p < 1:
            raise InvalidDims("dropout_p must lie in [0, 1)")
        if not 0 < self.val_fraction < 1:
            raise InvalidDims("val_fraction must lie in (0, 1)")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise InvalidDims("learning_rate must be > 0 and weight_decay >= 0")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise InvalidDims("batch_size, patience and max_epochs must be positive")


@dataclass
class AutoencoderModel:
    config: AeConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def copy(self) -> "AutoencoderModel":
        return AutoencoderModel(
            self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases]
        )

    def to_dict(self) -> dict:
        def enc(a):
            return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode("ascii")

        return {
            "format": "raresub-autoencoder",
            "version": CHECKPOINT_VERSION,
            "dtype": "<f8",
            "config": asdict(self.config),
            "layers": [
                {"shape": list(w.shape), "activation": act, "weight": enc(w), "bias": enc(b)}
                for w, b, act in zip(self.weights, self.biases, _ACTIVATIONS)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AutoencoderModel":
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')!r}")
        cfg = dict(d["config"])
        config = AeConfig(**cfg)
        weights, biases = [], []
        for layer in d["layers"]:
            shape = tuple(layer["shape"])
            w = np.frombuffer(base64.b64decode(layer["weight"]), dtype="<f8").reshape(shape)
            b = np.frombuffer(base64.b64decode(layer["bias"]), dtype="<f8")
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
        return cls(config, weights, biases)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "AutoencoderModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class TrainHistory:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_epoch: int = 0
    input_dim: int = 1
    train_indices: list[int] = field(default_factory=list)
    val_indices: list[int] = field(default_factory=list)

    @property
    def best_val_mse(self) -> float:
        return min(self.val_mse)

    # per-sample convention: sum of squared errors per sample, averaged over samples
    @property
    def train_mse_per_sample(self) -> list[float]:
        return [v * self.input_dim for v in self.train_mse]

    @property
    def val_mse_per_sample(self) -> list[float]:
        return [v * self.input_dim for v in self.val_mse]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "train_mse", "val_mse", "train_mse_per_sample", "val_mse_per_sample"])
            for i, (tr, va) in enumerate(zip(self.train_mse, self.val_mse), start=1):
                w.writerow([i, repr(tr), repr(va), repr(tr * self.input_dim), repr(va * self.input_dim)])


def build(config: AeConfig) -> AutoencoderModel:
    """Glorot-uniform weights, zero biases, drawn from ``config.seed``."""
    config.validate()
    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    for fan_in, fan_out in config.layer_dims:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return AutoencoderModel(config, weights, biases)


def _as_array(X) -> np.ndarray:
    values = getattr(X, "values", X)
    return np.asarray(values, dtype=np.float64)


def _forward(model, X, masks=None, stop=None):
    """Return the final output and per-layer (input, pre-activation) caches.

    ``masks`` maps a layer index to a (pre-scaled) dropout mask applied after
    that layer's activation.
    """
    a = X
    cache = []
    n_layers = len(model.weights) if stop is None else stop
    for i in range(n_layers):
        z = a @ model.weights[i] + model.biases[i]
        cache.append((a, z))
        a = np.maximum(z, 0.0) if _ACTIVATIONS[i] == "relu" else z
        if masks is not None and i in masks:
            a = a * masks[i]
    return a, cache


def _backward(model, cache, grad_out, masks=None):
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    g = grad_out
    for i in range(len(cache) - 1, -1, -1):
        a_in, z = cache[i]
        if masks is not None and i in masks:
            g = g * masks[i]
        if _ACTIVATIONS[i] == "relu":
            g = g * (z > 0)
        gw[i] = a_in.T @ g
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = g @ model.weights[i].T
    return gw, gb


def objective_and_grads(model, X, masks=None, weight_decay=None):
    """Per-entry MSE + (weight_decay/2)*||theta||^2 and its gradients."""
    X = _as_array(X)
    lam = model.config.weight_decay if weight_decay is None else weight_decay
    out, cache = _forward(model, X, masks)
    diff = out - X
    n_entries = diff.size
    mse = float(np.sum(diff * diff) / n_entries)
    gw, gb = _backward(model, cache, 2.0 * diff / n_entries, masks)
    penalty = 0.0
    if lam:
        for i in range(len(gw)):
            gw[i] = gw[i] + lam * model.weights[i]
            gb[i] = gb[i] + lam * model.biases[i]
        penalty = 0.5 * lam * sum(float(np.sum(p * p)) for p in model.params())
    return mse + penalty, mse, gw, gb


def objective(model, X, weight_decay=None) -> float:
    X = _as_array(X)
    lam = model.config.weight_decay if weight_decay is None else weight_decay
    out, _ = _forward(model, X)
    value = float(np.mean((out - X) ** 2))
    if lam:
        value += 0.5 * lam * sum(float(np.sum(p * p)) for p in model.params())
    return value


def encode(model: AutoencoderModel, X) -> np.ndarray:
    X = _as_array(X)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ShapeMismatch(f"expected (n, {model.config.input_dim}) input, got {X.shape}")
    z, _ = _forward(model, X, stop=N_ENCODER_LAYERS)
    return z


def reconstruct(model: AutoencoderModel, X) -> np.ndarray:
    X = _as_array(X)
    if X.ndim != 2 or X.shape[1] != model.config.input_dim:
        raise ShapeMismatch(f"expected (n, {model.config.input_dim}) input, got {X.shape}")
    out, _ = _forward(model, X)
    return out


def mse(X, X_hat) -> float:
    """Mean over samples of the squared Euclidean reconstruction error."""
    X, X_hat = _as_array(X), _as_array(X_hat)
    if X.shape != X_hat.shape:
        raise ShapeMismatch(f"{X.shape} vs {X_hat.shape}")
    if X.shape[0] == 0:
        return 0.0
    return float(np.sum((X - X_hat) ** 2) / X.shape[0])


def mse_per_entry(X, X_hat) -> float:
    X, X_hat = _as_array(X), _as_array(X_hat)
    if X.shape != X_hat.shape:
        raise ShapeMismatch(f"{X.shape} vs {X_hat.shape}")
    return float(np.mean((X - X_hat) ** 2))


def split_indices(n: int, val_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    n_val = int(round(val_fraction * n))
    if n_val < 2 or n - n_val < 2:
        raise TooFewSamples(f"{n} samples cannot be split into >= 2 train and >= 2 validation rows")
    perm = np.random.default_rng([seed, 1]).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _dropout_masks(rng, n_rows, width, p):
    if p <= 0:
        return None
    keep = rng.random((n_rows, width)) >= p
    return {0: keep / (1.0 - p)}


def train(model: AutoencoderModel, X, config: Optional[AeConfig] = None):
    """Adam on mini-batches with early stopping on validation MSE.

    Returns a new model holding the best-validation parameters and the
    :class:`TrainHistory`. Validation loss is evaluated without dropout.
    """
    cfg = config or model.config
    cfg.validate()
    X = _as_array(X)
    if X.ndim != 2 or X.shape[1] != cfg.input_dim:
        raise ShapeMismatch(f"expected (n, {cfg.input_dim}) input, got {X.shape}")
    train_idx, val_idx = split_indices(X.shape[0], cfg.val_fraction, cfg.seed)
    X_train, X_val = X[train_idx], X[val_idx]

    model = model.copy()
    params = model.params()
    m1 = [np.zeros_like(p) for p in params]
    m2 = [np.zeros_like(p) for p in params]
    h1 = cfg.hidden[0]
    history = TrainHistory(
        input_dim=cfg.input_dim, train_indices=train_idx.tolist(), val_indices=val_idx.tolist()
    )
    best = model.copy()
    best_val = np.inf
    step = 0

    for epoch in range(1, cfg.max_epochs + 1):
        rng = np.random.default_rng([cfg.seed, epoch])
        order = rng.permutation(len(train_idx))
        sq_sum = 0.0
        for start in range(0, len(order), cfg.batch_size):
            xb = X_train[order[start:start + cfg.batch_size]]
            masks = _dropout_masks(rng, xb.shape[0], h1, cfg.dropout_p)
            _, batch_mse, gw, gb = objective_and_grads(model, xb, masks, weight_decay=cfg.weight_decay)
            if not np.isfinite(batch_mse):
                history.stopped_epoch = epoch
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}", checkpoint=best, history=history)
            sq_sum += batch_mse * xb.size
            step += 1
            bc1 = 1.0 - ADAM_BETA1 ** step
            bc2 = 1.0 - ADAM_BETA2 ** step
            for j, g in enumerate([*gw, *gb]):
                m1[j] *= ADAM_BETA1
                m1[j] += (1.0 - ADAM_BETA1) * g
                m2[j] *= ADAM_BETA2
                m2[j] += (1.0 - ADAM_BETA2) * (g * g)
                params[j] -= cfg.learning_rate * (m1[j] / bc1) / (np.sqrt(m2[j] / bc2) + ADAM_EPS)
        history.train_mse.append(sq_sum / X_train.size)
        val = mse_per_entry(X_val, reconstruct(model, X_val))
        if not np.isfinite(val):
            history.stopped_epoch = epoch
            raise NonFiniteLoss(f"non-finite validation loss at epoch {epoch}", checkpoint=best, history=history)
        history.val_mse.append(val)
        history.stopped_epoch = epoch
        if val < best_val:
            best_val = val
            best = model.copy()
            history.best_epoch = epoch
        elif epoch - history.best_epoch >= cfg.patience:
            break
    log.info(
        "autoencoder stopped at epoch %d (best %d, val mse %.4f)",
        history.stopped_epoch, history.best_epoch, best_val,
    )
    return best, history


def gradient_check(model: AutoencoderModel, X_small, eps: float = 1e-5, weight_decay=None,
                   max_entries: Optional[int] = None, seed: int = 0, floor: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences.

    Every parameter entry is perturbed unless ``max_entries`` asks for a
    random subset. Relative error is ``|a - n| / max(|a|, |n|, floor)``; the
    floor keeps round-off on near-zero gradients (about 1e-11 absolute at
    ``eps=1e-5``) from dominating.
    Dropout is disabled.
    """
    X = _as_array(X_small)
    work = model.copy()
    _, _, gw, gb = objective_and_grads(work, X, weight_decay=weight_decay)
    analytic = [*gw, *gb]
    params = work.params()
    entries = [(pi, idx) for pi, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if max_entries is not None and max_entries < len(entries):
        pick = np.random.default_rng(seed).choice(len(entries), size=max_entries, replace=False)
        entries = [entries[i] for i in np.sort(pick)]
    worst = 0.0
    for pi, idx in entries:
        p = params[pi]
        orig = p[idx]
        p[idx] = orig + eps
        f_plus = objective(work, X, weight_decay)
        p[idx] = orig - eps
        f_minus = objective(work, X, weight_decay)
        p[idx] = orig
        numeric = (f_plus - f_minus) / (2 * eps)
        a = analytic[pi][idx]
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, err)
    return worst
