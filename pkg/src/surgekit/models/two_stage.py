"""Two-stage surrogate: a wet/dry classifier composed with an inundation
regressor, plus model archives and classifier x regressor grid search.

Inputs are z-scored with training-set statistics stored in the model, so
prediction applies the identical transform. Composition rule: classifier
probability below the threshold means DRY (NaN); otherwise the regressor's
output, clamped at zero, is the predicted peak surge.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyTrainingSet, ParseError, SchemaMismatch
from .boosting import BoostConfig, BoostedTrees, _Tree, train_boosted
from .network import FeedForwardNetwork, NetworkSpec, TrainConfig, train_network

_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)  # fixed timestamps keep archives bit-identical


# ---------------------------------------------------------------------------
# Stage wrappers: anything with fit/predict (and predict_proba for classifiers)


class NetworkStage:
    """Feed-forward network stage; head picks classifier vs regressor."""

    def __init__(self, hidden_sizes, head: str, cfg: TrainConfig):
        self.hidden_sizes = tuple(hidden_sizes)
        self.head = head
        self.cfg = cfg
        self.model: FeedForwardNetwork | None = None

    def fit(self, X, y, groups=None):
        spec = NetworkSpec(self.hidden_sizes, self.head, X.shape[1])
        self.model = train_network(spec, self.cfg, X, y, groups=groups)
        return self

    def predict(self, X):
        return self.model.predict(X)

    def predict_proba(self, X):
        return self.model.predict_proba(X)


class BoostStage:
    """Gradient-boosted trees stage; loss picks classifier vs regressor."""

    def __init__(self, cfg: BoostConfig):
        self.cfg = cfg
        self.model: BoostedTrees | None = None

    def fit(self, X, y, groups=None):
        self.model = train_boosted(self.cfg, X, y)
        return self

    def predict(self, X):
        return self.model.predict(X)

    def predict_proba(self, X):
        return self.model.predict_proba(X)


class OracleStage:
    """A planted stage computing its output directly from feature columns.

    Used in tests and grid-search baselines: ``fn`` maps the (unnormalized)
    feature matrix to predictions, so a planted truth function can compete
    against trained candidates. Not serializable.
    """

    def __init__(self, fn, feature_names):
        self.fn = fn
        self.feature_names = list(feature_names)
        self.norm_mean = None
        self.norm_std = None

    def fit(self, X, y, groups=None):
        return self

    def _raw(self, X):
        if self.norm_mean is not None:
            X = X * self.norm_std + self.norm_mean
        return np.asarray(self.fn(X, self.feature_names), dtype=np.float64)

    def predict(self, X):
        return self._raw(X)

    def predict_proba(self, X):
        return np.clip(self._raw(X), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Two-stage model


@dataclass
class TwoStageModel:
    classifier: object
    regressor: object
    threshold: float
    feature_names: list
    norm_mean: np.ndarray
    norm_std: np.ndarray

    def normalize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.norm_mean) / self.norm_std


def _normalization(X: np.ndarray):
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)
    return mean, std


def train_two_stage(matrix, classifier, regressor, threshold: float = 0.5) -> TwoStageModel:
    """Fit classifier on wet/dry labels and regressor on wet rows only.

    ``matrix`` is a :class:`~surgekit.features.FeatureMatrix` whose labels use
    NaN for DRY. Row storm ids drive the validation grouping of network stages.
    """
    if matrix.labels is None:
        raise EmptyTrainingSet("feature matrix has no labels")
    if matrix.n_rows == 0:
        raise EmptyTrainingSet("feature matrix has no rows")
    wet = ~np.isnan(matrix.labels)
    if not wet.any():
        raise EmptyTrainingSet("no wet rows to train the regressor on")
    mean, std = _normalization(matrix.X)
    Xn = (matrix.X - mean) / std
    groups = list(matrix.storm_ids)
    classifier.fit(Xn, wet.astype(np.float64), groups=groups)
    wet_groups = [g for g, w in zip(groups, wet) if w]
    regressor.fit(Xn[wet], matrix.labels[wet], groups=wet_groups)
    # Oracle stages see unnormalized features; hand them the transform.
    for stage in (classifier, regressor):
        if isinstance(stage, OracleStage):
            stage.norm_mean, stage.norm_std = mean, std
    return TwoStageModel(classifier, regressor, threshold, list(matrix.feature_names), mean, std)


def predict_two_stage(model: TwoStageModel, matrix_or_X, feature_names=None) -> np.ndarray:
    """Per-row prediction: NaN for DRY, otherwise peak surge in meters (>= 0)."""
    if hasattr(matrix_or_X, "feature_names"):
        names = list(matrix_or_X.feature_names)
        X = matrix_or_X.X
    else:
        names = None if feature_names is None else list(feature_names)
        X = np.asarray(matrix_or_X, dtype=np.float64)
    if names is not None and names != list(model.feature_names):
        raise SchemaMismatch("feature columns do not match the model schema")
    if X.shape[1] != len(model.feature_names):
        raise SchemaMismatch(f"expected {len(model.feature_names)} columns, got {X.shape[1]}")
    Xn = model.normalize(X)
    proba = np.asarray(model.classifier.predict_proba(Xn), dtype=np.float64)
    out = np.full(len(X), np.nan)
    wet = proba >= model.threshold
    if wet.any():
        out[wet] = np.maximum(np.asarray(model.regressor.predict(Xn[wet]), dtype=np.float64), 0.0)
    return out


# ---------------------------------------------------------------------------
# Serialization: a zip archive of manifest.json plus .npy payloads


def _writestr(zf: zipfile.ZipFile, name: str, payload: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    zf.writestr(info, payload)


def _write_array(zf: zipfile.ZipFile, name: str, arr: np.ndarray) -> None:
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr))
    _writestr(zf, name, buf.getvalue())


def _read_array(zf: zipfile.ZipFile, name: str) -> np.ndarray:
    return np.load(io.BytesIO(zf.read(name)), allow_pickle=False)


def _stage_meta(stage, prefix: str, zf: zipfile.ZipFile) -> dict:
    if isinstance(stage, NetworkStage):
        net = stage.model
        for k, (W, b) in enumerate(zip(net.weights, net.biases)):
            _write_array(zf, f"{prefix}/W{k}.npy", W)
            _write_array(zf, f"{prefix}/b{k}.npy", b)
        return {
            "type": "network",
            "hidden_sizes": list(net.spec.hidden_sizes),
            "head": net.spec.head,
            "input_dim": net.spec.input_dim,
            "n_layers": len(net.weights),
        }
    if isinstance(stage, BoostStage):
        model = stage.model
        nodes = np.concatenate([t.as_array() for t in model.trees], axis=0)
        offsets = np.cumsum([0] + [len(t.feature) for t in model.trees])
        _write_array(zf, f"{prefix}/tree_nodes.npy", nodes)
        _write_array(zf, f"{prefix}/tree_offsets.npy", offsets)
        c = model.cfg
        return {
            "type": "boosted",
            "loss": c.loss,
            "rounds": c.rounds,
            "max_depth": c.max_depth,
            "shrinkage": c.shrinkage,
            "n_bins": c.n_bins,
            "min_samples_leaf": c.min_samples_leaf,
            "n_trees": len(model.trees),
        }
    raise ParseError(f"stage of type {type(stage).__name__} is not serializable")


def _stage_from_meta(meta: dict, prefix: str, zf: zipfile.ZipFile):
    if meta["type"] == "network":
        spec = NetworkSpec(tuple(meta["hidden_sizes"]), meta["head"], int(meta["input_dim"]))
        weights = [_read_array(zf, f"{prefix}/W{k}.npy") for k in range(meta["n_layers"])]
        biases = [_read_array(zf, f"{prefix}/b{k}.npy") for k in range(meta["n_layers"])]
        stage = NetworkStage(spec.hidden_sizes, spec.head, TrainConfig())
        stage.model = FeedForwardNetwork.from_params(spec, weights, biases)
        return stage
    if meta["type"] == "boosted":
        cfg = BoostConfig(rounds=int(meta["rounds"]), max_depth=int(meta["max_depth"]),
                          shrinkage=float(meta["shrinkage"]), loss=meta["loss"],
                          n_bins=int(meta["n_bins"]), min_samples_leaf=int(meta["min_samples_leaf"]))
        nodes = _read_array(zf, f"{prefix}/tree_nodes.npy")
        offsets = _read_array(zf, f"{prefix}/tree_offsets.npy").astype(np.int64)
        stage = BoostStage(cfg)
        stage.model = BoostedTrees(cfg)
        stage.model.trees = [_Tree.from_array(nodes[offsets[i]:offsets[i + 1]])
                             for i in range(len(offsets) - 1)]
        return stage
    raise ParseError(f"unknown stage type {meta['type']!r} in model file")


def save_model(model: TwoStageModel, path) -> None:
    """Write a self-describing model archive (bit-identical across runs)."""
    with zipfile.ZipFile(path, "w") as zf:
        cls_meta = _stage_meta(model.classifier, "classifier", zf)
        reg_meta = _stage_meta(model.regressor, "regressor", zf)
        _write_array(zf, "norm_mean.npy", model.norm_mean)
        _write_array(zf, "norm_std.npy", model.norm_std)
        manifest = {
            "format": "surgekit-model",
            "format_version": 1,
            "threshold": model.threshold,
            "feature_names": list(model.feature_names),
            "classifier": cls_meta,
            "regressor": reg_meta,
        }
        _writestr(zf, "manifest.json", json.dumps(manifest, sort_keys=True, indent=1).encode())


def load_model(path) -> TwoStageModel:
    p = Path(path)
    if not p.exists():
        from ..errors import MissingFile

        raise MissingFile(p)
    with zipfile.ZipFile(p, "r") as zf:
        manifest = json.loads(zf.read("manifest.json").decode())
        if manifest.get("format") != "surgekit-model":
            raise ParseError("not a surgekit model archive")
        classifier = _stage_from_meta(manifest["classifier"], "classifier", zf)
        regressor = _stage_from_meta(manifest["regressor"], "regressor", zf)
        return TwoStageModel(classifier, regressor, float(manifest["threshold"]),
                             list(manifest["feature_names"]),
                             _read_array(zf, "norm_mean.npy"), _read_array(zf, "norm_std.npy"))


# ---------------------------------------------------------------------------
# Grid search


@dataclass(frozen=True)
class GridResult:
    classifier: str
    regressor: str
    r2: float
    rmse: float


def grid_search(classifiers, regressors, train_matrix, test_matrix, threshold: float = 0.5):
    """Evaluate every classifier x regressor pair on the test set.

    ``classifiers`` and ``regressors`` are lists of ``(name, stage)``. Each
    stage is trained once and reused across pairs. Metrics are computed across
    all test points with DRY mapped to zero, so both stages contribute to the
    error. Returns :class:`GridResult` rows ranked best (lowest RMSE) first.
    """
    from ..evaluate import r2 as r2_score
    from ..evaluate import rmse as rmse_score

    if not classifiers or not regressors:
        raise EmptyTrainingSet("need at least one candidate per stage")
    if test_matrix.labels is None:
        raise EmptyTrainingSet("test matrix has no labels")

    results = []
    trained_cls = {}
    trained_reg = {}
    wet = ~np.isnan(train_matrix.labels)
    mean, std = _normalization(train_matrix.X)
    Xn = (train_matrix.X - mean) / std
    groups = list(train_matrix.storm_ids)
    wet_groups = [g for g, w in zip(groups, wet) if w]
    for name, stage in classifiers:
        stage.fit(Xn, wet.astype(np.float64), groups=groups)
        if isinstance(stage, OracleStage):
            stage.norm_mean, stage.norm_std = mean, std
        trained_cls[name] = stage
    for name, stage in regressors:
        stage.fit(Xn[wet], train_matrix.labels[wet], groups=wet_groups)
        if isinstance(stage, OracleStage):
            stage.norm_mean, stage.norm_std = mean, std
        trained_reg[name] = stage

    truth = np.where(np.isnan(test_matrix.labels), 0.0, test_matrix.labels)
    for cname, _ in classifiers:
        for rname, _ in regressors:
            model = TwoStageModel(trained_cls[cname], trained_reg[rname], threshold,
                                  list(train_matrix.feature_names), mean, std)
            pred = predict_two_stage(model, test_matrix)
            pred = np.where(np.isnan(pred), 0.0, pred)
            results.append(GridResult(cname, rname,
                                      float(r2_score(pred, truth)), float(rmse_score(pred, truth))))
    results.sort(key=lambda r: (r.rmse, -r.r2, r.classifier, r.regressor))
    return results


def format_grid_table(results) -> str:
    """Human-readable ranking table, one row per candidate pair."""
    lines = [f"{'classifier':>12} {'regressor':>12} {'R2':>8} {'RMSE':>8}"]
    for r in results:
        lines.append(f"{r.classifier:>12} {r.regressor:>12} {r.r2:>8.3f} {r.rmse:>8.3f}")
    return "\n".join(lines)
