"""Orchestration: configuration, point sampling, train/test splits, and the
end-to-end detect -> assemble -> reduce -> train -> predict -> evaluate run.

Configuration is a flat ``key=value`` text file with section-prefixed keys
(``event.``, ``feature.``, ``model.``, ``split.``, ``sampling.``, ``synth.``,
``paths.``). Every key can be overridden by an environment variable named
``SURGE_`` + the upper-cased key with dots replaced by underscores
(``SURGE_EVENT_TRIGGER``), and by a mirrored CLI flag (``--event.trigger``);
CLI wins over environment, environment over file, file over defaults.

A run owns its output directory exclusively and writes every intermediate
artifact plus ``manifest.json`` recording the six pipeline stages, input file
hashes, and the resolved configuration.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import evaluate as ev
from . import events as evmod
from . import features as ft
from . import synth as synthmod
from . import tides
from .errors import (
    ConfigError,
    EmptySelection,
    MissingFile,
    StageError,
    TooFewStorms,
)
from .ingest import (
    PointSet,
    fmt,
    load_coast,
    load_forcing,
    load_gauge_series,
    load_max_surge,
    load_point_set,
    load_storm_track,
)
from .models import (
    BoostConfig,
    BoostStage,
    NETWORK_PRESETS,
    NetworkStage,
    TrainConfig,
    grid_search,
    load_model,
    predict_two_stage,
    save_model,
    train_two_stage,
)
from .models.two_stage import format_grid_table

STAGES = ("detect-events", "assemble", "reduce", "train", "predict", "evaluate")
ENV_PREFIX = "SURGE_"


# ---------------------------------------------------------------------------
# Configuration schema


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_boxes(s: str) -> tuple:
    try:
        return tuple(float(v) for v in s.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {s!r}") from None


def _parse_opt_float(s: str):
    return None if s.strip().lower() in ("", "none") else float(s)


def _parse_auto_int(s: str):
    return None if s.strip().lower() == "auto" else int(s)


def _parse_auto_bool(s: str):
    return None if s.strip().lower() == "auto" else _parse_bool(s)


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip()
        if v not in options:
            raise ConfigError(f"expected one of {options}, got {s!r}")
        return v

    return parse


CONFIG_SCHEMA = {
    # surge-event detection
    "event.trigger": (0.3, float, "trigger threshold T in meters"),
    "event.continuity": (0.5, float, "continuity factor c in (0,1]"),
    "event.lull_hours": (6.0, float, "lull period L in hours"),
    "event.shoulder_hours": (12.0, float, "shoulder period S in hours"),
    "event.include_negative": (False, _parse_bool, "also write set-down events"),
    # feature engineering
    "feature.mode": ("track", _choice("track", "trackless"), "feature-set variant"),
    "feature.window_before_hours": (6.0, float, "hours before landfall (track mode)"),
    "feature.window_after_hours": (6.0, float, "hours after landfall (track mode)"),
    "feature.forcing_boxes": ((0.1, 0.2, 0.4), _parse_boxes, "forcing box sizes in degrees"),
    "feature.bathy_boxes": ((0.05, 0.1, 0.4, 1.0), _parse_boxes, "bathymetry box sizes in degrees"),
    "feature.include_ice": (None, _parse_auto_bool, "ice features (auto: trackless only)"),
    "feature.include_tides": (None, _parse_auto_bool, "tide features (auto: trackless only)"),
    "feature.tau": (None, _parse_opt_float, "correlation threshold; none disables reduction"),
    # models
    "model.classifier": ("gbt", _choice("nn1", "nn2", "nn3", "gbt"), "wet/dry stage"),
    "model.regressor": ("gbt", _choice("nn1", "nn2", "nn3", "gbt"), "inundation stage"),
    "model.epochs_classifier": (50, int, "network epochs for classification"),
    "model.epochs_regressor": (100, int, "network epochs for regression"),
    "model.lr0": (1e-4, float, "initial learning rate"),
    "model.lr_min": (1e-6, float, "learning-rate floor"),
    "model.batch_size": (1024, int, "minibatch size"),
    "model.rounds": (250, int, "boosting rounds"),
    "model.max_depth": (6, int, "tree depth limit"),
    "model.shrinkage": (0.1, float, "boosting shrinkage"),
    "model.threshold": (0.5, float, "wet probability threshold"),
    "model.seed": (0, int, "training seed"),
    # splits and sampling
    "split.kind": ("random_by_storm", _choice("random_by_storm", "temporal_by_event_start"),
                   "train/test split flavor"),
    "split.train_fraction": (0.9, float, "fraction of storms used for training"),
    "split.seed": (0, int, "split shuffle seed"),
    "sampling.coastal_only": (True, _parse_bool, "restrict to coastal points"),
    "sampling.landfall_radius_km": (150.0, float, "landfall radius filter (track mode)"),
    "sampling.decimation": (None, _parse_auto_int, "keep every k-th point (auto: 10 track, 1 trackless)"),
    # synthetic corpus
    "synth.n_storms": (20, int, "number of synthetic storms"),
    "synth.n_points": (300, int, "number of synthetic points"),
    "synth.seed": (0, int, "corpus seed"),
    "synth.a": (0.1, float, "surge per unit peak wind"),
    "synth.lam_km": (60.0, float, "coastal decay length in km"),
    "synth.b": (0.05, float, "depth penalty coefficient"),
    "synth.dry_cutoff": (0.0, float, "surge at or below this is DRY"),
    # IO
    "paths.corpus": ("", str, "corpus directory (points/coast/storms/gauges)"),
    "paths.out": ("out", str, "artifact output directory"),
}


def env_var_name(key: str) -> str:
    return ENV_PREFIX + key.upper().replace(".", "_")


def parse_config_file(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise MissingFile(p)
    out = {}
    for n, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{p}:{n}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve_config(file_values=None, cli_values=None, environ=None) -> dict:
    """Merge defaults < file < environment < CLI into a typed config map."""
    environ = os.environ if environ is None else environ
    cfg = {k: default for k, (default, _, _) in CONFIG_SCHEMA.items()}

    def apply(values: dict, origin: str):
        for key, raw in values.items():
            if key not in CONFIG_SCHEMA:
                raise ConfigError(f"unknown config key {key!r} ({origin})")
            if raw is None:
                continue
            _, parse, _ = CONFIG_SCHEMA[key]
            try:
                cfg[key] = parse(raw) if isinstance(raw, str) else raw
            except (ValueError, ConfigError) as e:
                raise ConfigError(f"bad value for {key} ({origin}): {e}") from None

    if file_values:
        apply(file_values, "config file")
    env_values = {}
    for key in CONFIG_SCHEMA:
        name = env_var_name(key)
        if name in environ:
            env_values[key] = environ[name]
    apply(env_values, "environment")
    if cli_values:
        apply(cli_values, "command line")
    return cfg


def feature_config_from(cfg: dict) -> ft.FeatureConfig:
    mode = cfg["feature.mode"]
    trackless = mode == "trackless"
    include_ice = cfg["feature.include_ice"]
    include_tides = cfg["feature.include_tides"]
    return ft.FeatureConfig(
        mode=mode,
        window_before_hours=cfg["feature.window_before_hours"],
        window_after_hours=cfg["feature.window_after_hours"],
        forcing_boxes=cfg["feature.forcing_boxes"],
        bathy_boxes=cfg["feature.bathy_boxes"],
        include_ice=trackless if include_ice is None else include_ice,
        include_tides=trackless if include_tides is None else include_tides,
    )


def _decimation(cfg: dict) -> int:
    dec = cfg["sampling.decimation"]
    if dec is None:
        return 10 if cfg["feature.mode"] == "track" else 1
    return dec


# ---------------------------------------------------------------------------
# Sampling and splits


@dataclass(frozen=True)
class SamplingSpec:
    coastal_only: bool = True
    landfall_radius_km: float = 150.0
    decimation: int = 10

    def __post_init__(self):
        if self.landfall_radius_km <= 0:
            raise ConfigError("landfall radius must be positive")
        if self.decimation < 1:
            raise ConfigError("decimation must be >= 1")


@dataclass(frozen=True)
class SplitSpec:
    kind: str = "random_by_storm"
    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random_by_storm", "temporal_by_event_start"):
            raise ConfigError(f"unknown split kind {self.kind!r}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train fraction must be in (0, 1)")


def select_points(points: PointSet, landfall, spec: SamplingSpec):
    """Point ids kept for one storm: coastal filter, then the landfall-radius
    filter (inclusive boundary), then every k-th survivor by ascending id."""
    mask = points.is_coastal.copy() if spec.coastal_only else np.ones(len(points), dtype=bool)
    if landfall is not None:
        _, llon, llat = landfall
        d = ft.haversine_km(points.lon, points.lat, llon, llat)
        mask &= d <= spec.landfall_radius_km
    survivors = points.ids[mask]  # ids are stored ascending
    picked = survivors[::spec.decimation]
    if len(picked) == 0:
        raise EmptySelection("no points survive the sampling filters")
    return [int(i) for i in picked]


def split_storms(storm_starts, spec: SplitSpec):
    """(train_ids, test_ids) from a list of (storm_id, start_epoch) pairs."""
    storms = list(storm_starts)
    if len(storms) < 2:
        raise TooFewStorms(f"need at least 2 storms, got {len(storms)}")
    n_train = min(max(int(spec.train_fraction * len(storms)), 1), len(storms) - 1)
    if spec.kind == "temporal_by_event_start":
        ordered = sorted(storms, key=lambda s: (s[1], s[0]))
    else:
        ids = sorted(s[0] for s in storms)
        rng = np.random.default_rng(spec.seed)
        perm = rng.permutation(len(ids))
        by_id = dict(storms)
        ordered = [(ids[i], by_id[ids[i]]) for i in perm]
    train = [s[0] for s in ordered[:n_train]]
    test = [s[0] for s in ordered[n_train:]]
    return train, test


# ---------------------------------------------------------------------------
# Corpus discovery


@dataclass
class Corpus:
    root: Path
    points: PointSet
    coast: object
    harmonics: dict
    storm_dirs: list  # (storm_id, Path), sorted
    gauge_files: list


def load_corpus(root) -> Corpus:
    root = Path(root)
    if not root.is_dir():
        raise MissingFile(root)
    points = load_point_set(root / "points.csv")
    coast = load_coast(root / "coast.csv")
    harmonics = {}
    if (root / "harmonics.csv").exists():
        harmonics = tides.load_harmonics(root / "harmonics.csv")
    storm_dirs = []
    storms_root = root / "storms"
    if storms_root.is_dir():
        for d in sorted(storms_root.iterdir()):
            if d.is_dir() and (d / "forcing.txt").exists():
                storm_dirs.append((d.name, d))
    gauge_files = sorted((root / "gauges").glob("*.csv")) if (root / "gauges").is_dir() else []
    return Corpus(root, points, coast, harmonics, storm_dirs, gauge_files)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def corpus_input_hashes(corpus: Corpus) -> dict:
    files = [corpus.root / "points.csv", corpus.root / "coast.csv"]
    if (corpus.root / "harmonics.csv").exists():
        files.append(corpus.root / "harmonics.csv")
    for _, d in corpus.storm_dirs:
        for name in ("forcing.txt", "track.csv", "maxsurge.csv"):
            if (d / name).exists():
                files.append(d / name)
    files.extend(corpus.gauge_files)
    return {str(f.relative_to(corpus.root)): _sha256(f) for f in sorted(files)}


# ---------------------------------------------------------------------------
# Stage implementations (shared by the CLI subcommands and `run`)


def stage_detect_events(cfg: dict, corpus: Corpus, out: Path):
    params = evmod.EventParams(cfg["event.trigger"], cfg["event.continuity"],
                               cfg["event.lull_hours"], cfg["event.shoulder_hours"])
    per_station = {}
    negative = {}
    for f in corpus.gauge_files:
        g = load_gauge_series(f)
        res = tides.residual(g)
        per_station[g.station_id] = evmod.get_surge_events(res, g.times, params, g.station_id)
        if cfg["event.include_negative"]:
            negative[g.station_id] = evmod.get_setdown_events(res, g.times, params, g.station_id)
    catalog = evmod.merge_station_events(per_station)
    evmod.write_event_catalog(catalog, out / "events.csv")
    artifacts = ["events.csv"]
    if cfg["event.include_negative"]:
        evmod.write_event_catalog(evmod.merge_station_events(negative), out / "events_negative.csv")
        artifacts.append("events_negative.csv")
    return catalog, artifacts


def _storm_inputs(cfg: dict, corpus: Corpus, catalog):
    """Build StormInput records plus (storm_id, start) pairs for splitting.

    Track mode dates storms by their first track sample. Trackless mode keeps
    only storms whose forcing period overlaps a detected event and dates them
    by the earliest overlapping event's start.
    """
    mode = cfg["feature.mode"]
    fcfg = feature_config_from(cfg)
    sampling = SamplingSpec(cfg["sampling.coastal_only"], cfg["sampling.landfall_radius_km"],
                            _decimation(cfg))
    storms, starts = [], []
    for storm_id, d in corpus.storm_dirs:
        grid = load_forcing(d / "forcing.txt")
        track = load_storm_track(d / "track.csv") if (d / "track.csv").exists() else None
        surge = load_max_surge(d / "maxsurge.csv") if (d / "maxsurge.csv").exists() else None
        if mode == "track":
            if track is None:
                raise MissingFile(d / "track.csv")
            landfall = ft.find_landfall(track, corpus.coast)
            start = float(track.times[0])
        else:
            landfall = None
            t_end = grid.t0 + grid.dt * (grid.nt - 1)
            overlapping = [e for e in (catalog or []) if e.start <= t_end and grid.t0 <= e.end]
            if not overlapping:
                continue
            start = min(e.start for e in overlapping)
        point_ids = select_points(corpus.points, landfall if mode == "track" else None, sampling)
        storms.append(ft.StormInput(storm_id, grid, track, surge, point_ids, landfall))
        starts.append((storm_id, start))
    _ = fcfg
    return storms, starts


def stage_assemble(cfg: dict, corpus: Corpus, catalog, out: Path):
    storms, starts = _storm_inputs(cfg, corpus, catalog)
    fcfg = feature_config_from(cfg)
    matrix = ft.assemble(fcfg, storms, corpus.points, corpus.coast, corpus.harmonics)
    ft.write_feature_matrix(matrix, out / "features.csv")
    meta = ["storm_id,start"]
    for storm_id, start in starts:
        meta.append(f"{storm_id},{fmt(start)}")
    (out / "storm_meta.csv").write_text("\n".join(meta) + "\n")
    return matrix, starts, ["features.csv", "storm_meta.csv"]


def load_storm_meta(path):
    lines = Path(path).read_text().splitlines()
    return [(p[0], float(p[1])) for p in (line.split(",") for line in lines[1:] if line.strip())]


def compute_split(cfg: dict, starts, out: Path):
    spec = SplitSpec(cfg["split.kind"], cfg["split.train_fraction"], cfg["split.seed"])
    train_ids, test_ids = split_storms(starts, spec)
    (out / "splits.json").write_text(
        json.dumps({"train": sorted(train_ids), "test": sorted(test_ids)}, indent=2) + "\n")
    return train_ids, test_ids


def stage_reduce(cfg: dict, matrix, train_ids, out: Path):
    tau = cfg["feature.tau"]
    if tau is None:
        return list(matrix.feature_names), []
    train_mask = np.array([s in set(train_ids) for s in matrix.storm_ids])
    retained = ft.correlation_reduce(matrix.select_rows(train_mask), tau)
    (out / "retained.txt").write_text("\n".join(retained) + "\n")
    return retained, ["retained.txt"]


def _make_stage(cfg: dict, name: str, task: str):
    if name == "gbt":
        loss = "logistic" if task == "classifier" else "squared_error"
        return BoostStage(BoostConfig(rounds=cfg["model.rounds"], max_depth=cfg["model.max_depth"],
                                      shrinkage=cfg["model.shrinkage"], loss=loss))
    head = "sigmoid" if task == "classifier" else "relu"
    epochs = cfg["model.epochs_classifier"] if task == "classifier" else cfg["model.epochs_regressor"]
    tc = TrainConfig(epochs=epochs, lr0=cfg["model.lr0"], lr_min=cfg["model.lr_min"],
                     batch_size=cfg["model.batch_size"], seed=cfg["model.seed"])
    return NetworkStage(NETWORK_PRESETS[name], head, tc)


def stage_train(cfg: dict, matrix, retained, train_ids, out: Path):
    train_mask = np.array([s in set(train_ids) for s in matrix.storm_ids])
    train_matrix = matrix.select_rows(train_mask).select_columns(retained)
    classifier = _make_stage(cfg, cfg["model.classifier"], "classifier")
    regressor = _make_stage(cfg, cfg["model.regressor"], "regressor")
    model = train_two_stage(train_matrix, classifier, regressor, cfg["model.threshold"])
    save_model(model, out / "model.zip")
    return model, ["model.zip", "splits.json"]


def stage_predict(model, matrix, retained, test_ids, out: Path):
    test_mask = np.array([s in set(test_ids) for s in matrix.storm_ids])
    test_matrix = matrix.select_rows(test_mask).select_columns(retained)
    pred = predict_two_stage(model, test_matrix)
    lines = ["storm_id,point_id,prediction"]
    for sid, pid, v in zip(test_matrix.storm_ids, test_matrix.point_ids, pred):
        lines.append(f"{sid},{int(pid)},{'DRY' if np.isnan(v) else fmt(float(v))}")
    (out / "predictions.csv").write_text("\n".join(lines) + "\n")
    return test_matrix, pred, ["predictions.csv"]


def stage_evaluate(points: PointSet, test_matrix, pred, out: Path):
    truth = test_matrix.labels
    report = ev.compute_report(np.nan_to_num(pred, nan=0.0), np.nan_to_num(truth, nan=0.0))
    pred_by_storm: dict = {}
    truth_by_storm: dict = {}
    for sid, pid, pv, tv in zip(test_matrix.storm_ids, test_matrix.point_ids, pred, truth):
        pred_by_storm.setdefault(sid, {})[int(pid)] = float(pv)
        truth_by_storm.setdefault(sid, {})[int(pid)] = float(tv)
    report.per_point_mae = ev.spatial_mean_abs_error(pred_by_storm, truth_by_storm)
    ev.write_metric_report(report, out / "metrics.json", out / "metrics.csv")
    ev.write_error_geojson(report.per_point_mae, points, out / "errors.geojson")
    return report, ["metrics.json", "metrics.csv", "errors.geojson"]


# ---------------------------------------------------------------------------
# End-to-end run


def run_end_to_end(cfg: dict) -> dict:
    """Execute all stages, writing artifacts and a manifest into paths.out.

    Any stage failure aborts with a :class:`StageError` naming the stage.
    Returns the manifest dictionary.
    """
    if not cfg["paths.corpus"]:
        raise ConfigError("paths.corpus is required")
    out = Path(cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    corpus = load_corpus(cfg["paths.corpus"])
    trackless = cfg["feature.mode"] == "trackless"
    manifest = {
        "kind": "surgekit-run",
        "config": {k: _config_repr(v) for k, v in sorted(cfg.items())},
        "inputs": corpus_input_hashes(corpus),
        "stages": [],
    }

    def record(name, status, artifacts=()):
        manifest["stages"].append({"name": name, "status": status, "artifacts": list(artifacts)})

    catalog = None
    if trackless:
        try:
            catalog, artifacts = stage_detect_events(cfg, corpus, out)
        except Exception as e:
            raise StageError("detect-events", e) from e
        record("detect-events", "done", artifacts)
    else:
        record("detect-events", "skipped")

    try:
        matrix, starts, artifacts = stage_assemble(cfg, corpus, catalog, out)
    except Exception as e:
        raise StageError("assemble", e) from e
    record("assemble", "done", artifacts)

    try:
        train_ids, test_ids = compute_split(cfg, starts, out)
        retained, artifacts = stage_reduce(cfg, matrix, train_ids, out)
    except Exception as e:
        raise StageError("reduce", e) from e
    record("reduce", "done" if cfg["feature.tau"] is not None else "skipped", artifacts)

    try:
        model, artifacts = stage_train(cfg, matrix, retained, train_ids, out)
    except Exception as e:
        raise StageError("train", e) from e
    record("train", "done", artifacts)

    try:
        test_matrix, pred, artifacts = stage_predict(model, matrix, retained, test_ids, out)
    except Exception as e:
        raise StageError("predict", e) from e
    record("predict", "done", artifacts)

    try:
        report, artifacts = stage_evaluate(corpus.points, test_matrix, pred, out)
    except Exception as e:
        raise StageError("evaluate", e) from e
    record("evaluate", "done", artifacts)
    manifest["metrics"] = {"r2": report.r2, "rmse": report.rmse, "mae": report.mae, "n": report.n}

    (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def _config_repr(v):
    if isinstance(v, tuple):
        return list(v)
    return v


# ---------------------------------------------------------------------------
# Standalone command helpers (the CLI maps one subcommand to each)


def cmd_synth(cfg: dict) -> Path:
    spec = synthmod.SynthSpec(
        n_storms=cfg["synth.n_storms"], n_points=cfg["synth.n_points"], seed=cfg["synth.seed"],
        wind_to_surge=cfg["synth.a"], decay_km=cfg["synth.lam_km"], depth_coeff=cfg["synth.b"],
        dry_cutoff=cfg["synth.dry_cutoff"])
    corpus = synthmod.generate(spec)
    out = Path(cfg["paths.out"])
    synthmod.write_corpus(corpus, out)
    return out


def cmd_detect_events(cfg: dict) -> Path:
    corpus = load_corpus(cfg["paths.corpus"])
    out = Path(cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    stage_detect_events(cfg, corpus, out)
    return out / "events.csv"


def cmd_build_features(cfg: dict) -> Path:
    corpus = load_corpus(cfg["paths.corpus"])
    out = Path(cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    catalog = None
    if cfg["feature.mode"] == "trackless":
        events_file = out / "events.csv"
        if events_file.exists():
            catalog = evmod.load_event_catalog(events_file)
        else:
            catalog, _ = stage_detect_events(cfg, corpus, out)
    stage_assemble(cfg, corpus, catalog, out)
    return out / "features.csv"


def cmd_reduce_features(cfg: dict) -> Path:
    out = Path(cfg["paths.out"])
    matrix = ft.load_feature_matrix(out / "features.csv")
    starts = load_storm_meta(out / "storm_meta.csv")
    train_ids, _ = compute_split(cfg, starts, out)
    if cfg["feature.tau"] is None:
        raise ConfigError("reduce-features requires feature.tau")
    stage_reduce(cfg, matrix, train_ids, out)
    return out / "retained.txt"


def _load_features_and_split(cfg: dict, out: Path):
    matrix = ft.load_feature_matrix(out / "features.csv")
    starts = load_storm_meta(out / "storm_meta.csv")
    train_ids, test_ids = compute_split(cfg, starts, out)
    retained_file = out / "retained.txt"
    if retained_file.exists():
        retained = [line for line in retained_file.read_text().splitlines() if line.strip()]
    else:
        retained = list(matrix.feature_names)
    return matrix, train_ids, test_ids, retained


def cmd_train(cfg: dict) -> Path:
    out = Path(cfg["paths.out"])
    matrix, train_ids, _, retained = _load_features_and_split(cfg, out)
    stage_train(cfg, matrix, retained, train_ids, out)
    return out / "model.zip"


def cmd_predict(cfg: dict) -> Path:
    out = Path(cfg["paths.out"])
    matrix, _, test_ids, retained = _load_features_and_split(cfg, out)
    model = load_model(out / "model.zip")
    stage_predict(model, matrix, retained, test_ids, out)
    return out / "predictions.csv"


def cmd_evaluate(cfg: dict) -> Path:
    out = Path(cfg["paths.out"])
    corpus = load_corpus(cfg["paths.corpus"]) if cfg["paths.corpus"] else None
    matrix, _, test_ids, retained = _load_features_and_split(cfg, out)
    model = load_model(out / "model.zip")
    test_matrix, pred, _ = stage_predict(model, matrix, retained, test_ids, out)
    points = corpus.points if corpus else None
    if points is None:
        raise ConfigError("paths.corpus is required to geolocate per-point errors")
    stage_evaluate(points, test_matrix, pred, out)
    return out / "metrics.json"


def cmd_grid_search(cfg: dict) -> Path:
    out = Path(cfg["paths.out"])
    out.mkdir(parents=True, exist_ok=True)
    matrix, train_ids, test_ids, retained = _load_features_and_split(cfg, out)
    train_mask = np.array([s in set(train_ids) for s in matrix.storm_ids])
    test_mask = np.array([s in set(test_ids) for s in matrix.storm_ids])
    train_matrix = matrix.select_rows(train_mask).select_columns(retained)
    test_matrix = matrix.select_rows(test_mask).select_columns(retained)
    names = ("nn1", "nn2", "nn3", "gbt")
    classifiers = [(n, _make_stage(cfg, n, "classifier")) for n in names]
    regressors = [(n, _make_stage(cfg, n, "regressor")) for n in names]
    results = grid_search(classifiers, regressors, train_matrix, test_matrix,
                          cfg["model.threshold"])
    lines = ["classifier,regressor,r2,rmse"]
    for r in results:
        lines.append(f"{r.classifier},{r.regressor},{fmt(r.r2)},{fmt(r.rmse)}")
    (out / "grid.csv").write_text("\n".join(lines) + "\n")
    print(format_grid_table(results))
    return out / "grid.csv"
