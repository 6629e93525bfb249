"""Feed-forward networks with ReLU hidden layers, trained by Adam.

The classifier head is a sigmoid trained with binary cross entropy; the
regressor head is a ReLU trained with mean squared error (peak surge at wet
points is non-negative, so a ReLU output is well-posed). The learning rate
starts at ``lr0`` and halves whenever validation loss fails to improve for
``patience`` consecutive epochs, floored at ``lr_min``.

Everything is float64 numpy; training is bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyTrainingSet, NonFiniteLoss, ParseError

# Hidden-layer layouts exposed on the CLI.
NETWORK_PRESETS = {
    "nn1": (256, 512, 256),
    "nn2": (256, 512, 1024, 512, 256),
    "nn3": (256, 512, 1024, 2048, 1024, 512, 256),
}


@dataclass(frozen=True)
class NetworkSpec:
    hidden_sizes: tuple
    head: str  # "sigmoid" (classifier) or "relu" (regressor)
    input_dim: int

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if not self.hidden_sizes or any(h <= 0 for h in self.hidden_sizes):
            raise ParseError("hidden sizes must be positive")
        if self.head not in ("sigmoid", "relu"):
            raise ParseError(f"unknown head {self.head!r}")
        if self.input_dim <= 0:
            raise ParseError("input_dim must be positive")

    @classmethod
    def preset(cls, name: str, head: str, input_dim: int) -> "NetworkSpec":
        return cls(NETWORK_PRESETS[name], head, input_dim)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50              # classification default; regression uses 100
    lr0: float = 1e-4
    lr_min: float = 1e-6
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 1024
    seed: int = 0
    patience: int = 3
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 1:
            raise ParseError("epochs must be >= 1")
        if self.lr_min > self.lr0:
            raise ParseError("lr_min must not exceed lr0")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits: np.ndarray, y: np.ndarray) -> float:
    """Binary cross entropy from raw logits, numerically stable."""
    return float(np.mean(np.logaddexp(0.0, logits) - y * logits))


def mse_relu_loss(z: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error of a ReLU head applied to pre-activations z."""
    return float(np.mean((np.maximum(z, 0.0) - y) ** 2))


class FeedForwardNetwork:
    """Fully-connected net: ReLU hidden layers, one output neuron."""

    def __init__(self, spec: NetworkSpec, rng: np.random.Generator, out_bias: float = 0.0):
        self.spec = spec
        sizes = (spec.input_dim,) + spec.hidden_sizes + (1,)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)  # He init for ReLU stacks
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self.biases[-1][0] = out_bias
        self.history: dict = {}

    @classmethod
    def from_params(cls, spec: NetworkSpec, weights, biases) -> "FeedForwardNetwork":
        net = cls.__new__(cls)
        net.spec = spec
        net.weights = [np.asarray(W, dtype=np.float64) for W in weights]
        net.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        net.history = {}
        return net

    # -- forward ----------------------------------------------------------

    def _forward(self, X: np.ndarray):
        """Returns hidden activations [a0..aL-1] and the output pre-activation."""
        acts = [X]
        a = X
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
            acts.append(a)
        z = (a @ self.weights[-1] + self.biases[-1])[:, 0]
        return acts, z

    def raw_output(self, X: np.ndarray) -> np.ndarray:
        """Output pre-activation (logit for sigmoid head, pre-ReLU for relu head)."""
        return self._forward(np.asarray(X, dtype=np.float64))[1]

    def predict(self, X: np.ndarray) -> np.ndarray:
        z = self.raw_output(X)
        return _sigmoid(z) if self.spec.head == "sigmoid" else np.maximum(z, 0.0)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.spec.head != "sigmoid":
            raise ParseError("predict_proba requires a sigmoid head")
        return self.predict(X)

    # -- loss and gradients -------------------------------------------------

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        z = self.raw_output(X)
        return bce_loss(z, y) if self.spec.head == "sigmoid" else mse_relu_loss(z, y)

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray):
        """Mean loss and gradients w.r.t. every weight/bias, by backprop."""
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = len(y)
        acts, z = self._forward(X)
        if self.spec.head == "sigmoid":
            loss = bce_loss(z, y)
            dz = (_sigmoid(z) - y) / n
        else:
            out = np.maximum(z, 0.0)
            loss = float(np.mean((out - y) ** 2))
            dz = 2.0 * (out - y) * (z > 0.0) / n
        gW = [None] * len(self.weights)
        gb = [None] * len(self.biases)
        delta = dz[:, None]
        for layer in range(len(self.weights) - 1, -1, -1):
            gW[layer] = acts[layer].T @ delta
            gb[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (acts[layer] > 0.0)
        return loss, gW, gb


def _split_validation(n: int, groups, cfg: TrainConfig, rng: np.random.Generator):
    """Indices (train, val); held out by group when groups are given."""
    idx = np.arange(n)
    if groups is not None:
        uniq = sorted(set(groups))
        if len(uniq) >= 2:
            k = max(1, int(round(cfg.val_fraction * len(uniq))))
            k = min(k, len(uniq) - 1)
            held = set(rng.permutation(np.array(uniq, dtype=object))[:k].tolist())
            mask = np.array([g in held for g in groups])
            return idx[~mask], idx[mask]
    if n >= 10:
        k = max(1, int(round(cfg.val_fraction * n)))
        perm = rng.permutation(n)
        return perm[k:], perm[:k]
    return idx, idx  # too small to hold anything out


def train_network(spec: NetworkSpec, cfg: TrainConfig, X, y, groups=None) -> FeedForwardNetwork:
    """Train a network; records per-epoch train/val loss and learning rate.

    ``groups`` (e.g. storm ids per row) drive the validation holdout so that
    rows of one storm never straddle the train/validation boundary.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyTrainingSet("no training rows")
    if X.shape[1] != spec.input_dim:
        raise ParseError(f"X has {X.shape[1]} columns, spec expects {spec.input_dim}")
    rng = np.random.default_rng(cfg.seed)
    out_bias = float(np.mean(y)) if spec.head == "relu" else 0.0
    net = FeedForwardNetwork(spec, rng, out_bias=out_bias)

    tr_idx, va_idx = _split_validation(len(y), groups, cfg, rng)
    Xtr, ytr = X[tr_idx], y[tr_idx]
    Xva, yva = X[va_idx], y[va_idx]

    m_W = [np.zeros_like(W) for W in net.weights]
    v_W = [np.zeros_like(W) for W in net.weights]
    m_b = [np.zeros_like(b) for b in net.biases]
    v_b = [np.zeros_like(b) for b in net.biases]

    lr = cfg.lr0
    best_val = np.inf
    bad_epochs = 0
    history = {"train_loss": [], "val_loss": [], "lr": []}
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(ytr))
        epoch_loss = 0.0
        seen = 0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            loss, gW, gb = net.loss_and_grads(Xtr[batch], ytr[batch])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"training diverged (loss={loss})")
            epoch_loss += loss * len(batch)
            seen += len(batch)
            step += 1
            c1 = 1.0 - cfg.beta1 ** step
            c2 = 1.0 - cfg.beta2 ** step
            for k in range(len(net.weights)):
                m_W[k] = cfg.beta1 * m_W[k] + (1 - cfg.beta1) * gW[k]
                v_W[k] = cfg.beta2 * v_W[k] + (1 - cfg.beta2) * gW[k] ** 2
                net.weights[k] -= lr * (m_W[k] / c1) / (np.sqrt(v_W[k] / c2) + cfg.eps)
                m_b[k] = cfg.beta1 * m_b[k] + (1 - cfg.beta1) * gb[k]
                v_b[k] = cfg.beta2 * v_b[k] + (1 - cfg.beta2) * gb[k] ** 2
                net.biases[k] -= lr * (m_b[k] / c1) / (np.sqrt(v_b[k] / c2) + cfg.eps)
        val_loss = net.loss(Xva, yva)
        if not np.isfinite(val_loss):
            raise NonFiniteLoss(f"validation loss diverged ({val_loss})")
        history["train_loss"].append(epoch_loss / max(seen, 1))
        history["val_loss"].append(val_loss)
        history["lr"].append(lr)
        if val_loss < best_val:
            best_val = val_loss
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= cfg.patience:
                lr = max(lr / 2.0, cfg.lr_min)
                bad_epochs = 0
    net.history = history
    return net
