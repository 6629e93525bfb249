"""Gradient boosted regression trees, built from scratch on numpy.

Each round fits a depth-limited regression tree to the current loss gradients
(with Newton leaf values), then adds it with shrinkage. Split candidates are
quantile-binned thresholds (256 bins by default) searched greedily and
exactly. Squared-error loss trains regressors; logistic loss trains
classifiers whose predictions pass through the logistic link.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyTrainingSet, ParseError

_EPS = 1e-16  # guards divisions by vanishing hessians


@dataclass(frozen=True)
class BoostConfig:
    rounds: int = 250
    max_depth: int = 6
    shrinkage: float = 0.1
    loss: str = "squared_error"  # or "logistic"
    n_bins: int = 256
    min_samples_leaf: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ParseError("rounds must be >= 1")
        if not 0 < self.shrinkage <= 1:
            raise ParseError("shrinkage must be in (0, 1]")
        if self.loss not in ("squared_error", "logistic"):
            raise ParseError(f"unknown loss {self.loss!r}")
        if self.max_depth < 1 or self.n_bins < 2:
            raise ParseError("max_depth must be >= 1 and n_bins >= 2")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _quantile_edges(col: np.ndarray, n_bins: int) -> np.ndarray:
    """Interior candidate thresholds from quantiles (deduplicated)."""
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    return np.unique(np.quantile(col, qs))


@dataclass
class _Tree:
    """Flat node arrays; leaves have feature == -1 and carry ``value``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[idx]
            inner = feat >= 0
            if not inner.any():
                break
            rows = np.nonzero(inner)[0]
            take_left = X[rows, feat[rows]] < self.threshold[idx[rows]]
            idx[rows] = np.where(take_left, self.left[idx[rows]], self.right[idx[rows]])
        return self.value[idx]

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.feature.astype(np.float64), self.threshold,
                                self.left.astype(np.float64), self.right.astype(np.float64),
                                self.value])

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "_Tree":
        return cls(arr[:, 0].astype(np.int64), arr[:, 1].copy(),
                   arr[:, 2].astype(np.int64), arr[:, 3].astype(np.int64), arr[:, 4].copy())


def _fit_tree(bins: np.ndarray, edges, g: np.ndarray, h: np.ndarray, cfg: BoostConfig) -> _Tree:
    """Grow one tree on pre-binned features against gradients/hessians."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(node: int, rows: np.ndarray, depth: int):
        g_sum = float(np.add.reduce(g[rows]))
        h_sum = float(np.add.reduce(h[rows]))
        value[node] = -g_sum / (h_sum + _EPS)
        if depth >= cfg.max_depth or len(rows) < 2 * cfg.min_samples_leaf:
            return
        parent_score = g_sum * g_sum / (h_sum + _EPS)
        best_gain, best_feat, best_bin = 0.0, -1, -1
        for f in range(bins.shape[1]):
            nb = len(edges[f])
            if nb == 0:
                continue
            b = bins[rows, f]
            hist_g = np.bincount(b, weights=g[rows], minlength=nb + 1)
            hist_h = np.bincount(b, weights=h[rows], minlength=nb + 1)
            hist_n = np.bincount(b, minlength=nb + 1)
            gl = np.cumsum(hist_g)[:-1]
            hl = np.cumsum(hist_h)[:-1]
            nl = np.cumsum(hist_n)[:-1]
            gr, hr, nr = g_sum - gl, h_sum - hl, len(rows) - nl
            ok = (nl >= cfg.min_samples_leaf) & (nr >= cfg.min_samples_leaf)
            if not ok.any():
                continue
            gains = np.where(ok, gl * gl / (hl + _EPS) + gr * gr / (hr + _EPS) - parent_score, -np.inf)
            k = int(np.argmax(gains))
            if gains[k] > best_gain + 1e-12:
                best_gain, best_feat, best_bin = float(gains[k]), f, k
        if best_feat < 0:
            return
        thr = float(edges[best_feat][best_bin])
        go_left = bins[rows, best_feat] <= best_bin  # equivalent to x < thr
        feature[node] = best_feat
        threshold[node] = thr
        left[node] = new_node()
        right[node] = new_node()
        grow(left[node], rows[go_left], depth + 1)
        grow(right[node], rows[~go_left], depth + 1)

    root = new_node()
    grow(root, np.arange(bins.shape[0]), 0)
    return _Tree(np.array(feature, dtype=np.int64), np.array(threshold),
                 np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                 np.array(value))


class BoostedTrees:
    """Additive tree ensemble; raw score starts at 0 (probability 0.5)."""

    def __init__(self, cfg: BoostConfig):
        self.cfg = cfg
        self.trees: list = []
        self.train_loss: list = []

    def raw_predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.zeros(len(X))
        for tree in self.trees:
            out += self.cfg.shrinkage * tree.predict(X)
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        raw = self.raw_predict(X)
        return _sigmoid(raw) if self.cfg.loss == "logistic" else raw

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.cfg.loss != "logistic":
            raise ParseError("predict_proba requires logistic loss")
        return self.predict(X)


def _loss_value(cfg: BoostConfig, raw: np.ndarray, y: np.ndarray) -> float:
    if cfg.loss == "logistic":
        return float(np.mean(np.logaddexp(0.0, raw) - y * raw))
    return float(np.mean((raw - y) ** 2))


def train_boosted(cfg: BoostConfig, X, y) -> BoostedTrees:
    """Fit the ensemble; per-round training loss lands in ``model.train_loss``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise EmptyTrainingSet("no training rows")
    if cfg.loss == "logistic" and (np.any(y < 0) or np.any(y > 1)):
        raise ParseError("logistic loss expects labels in [0, 1]")

    edges = [_quantile_edges(X[:, f], cfg.n_bins) for f in range(X.shape[1])]
    bins = np.empty(X.shape, dtype=np.int64)
    for f in range(X.shape[1]):
        bins[:, f] = np.searchsorted(edges[f], X[:, f], side="right")

    model = BoostedTrees(cfg)
    raw = np.zeros(len(y))
    for _ in range(cfg.rounds):
        if cfg.loss == "logistic":
            p = _sigmoid(raw)
            g = p - y
            h = p * (1.0 - p)
        else:
            g = raw - y
            h = np.ones(len(y))
        tree = _fit_tree(bins, edges, g, h, cfg)
        raw = raw + cfg.shrinkage * tree.predict(X)
        model.trees.append(tree)
        model.train_loss.append(_loss_value(cfg, raw, y))
    return model
