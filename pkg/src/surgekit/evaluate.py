"""Error metrics and spatial/station aggregation.

DRY values (NaN) on either side of a comparison are mapped to 0.0 m before
any metric is computed, so a misclassified point contributes its full surge
magnitude as error and the metrics reflect both stages of the surrogate.
Sums use numpy's fixed pairwise order, so results are reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, NoData, NoEvents, ZeroVariance
from .ingest import fmt


def _clean_pair(pred, truth):
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    if p.shape != t.shape or p.ndim != 1:
        raise LengthMismatch("pred and truth must be 1-D and the same length")
    if len(p) == 0:
        raise LengthMismatch("metrics need at least one row")
    return np.nan_to_num(p, nan=0.0), np.nan_to_num(t, nan=0.0)


def rmse(pred, truth) -> float:
    """Root mean squared error in meters."""
    p, t = _clean_pair(pred, truth)
    return float(np.sqrt(np.mean((p - t) ** 2)))


def mae(pred, truth) -> float:
    """Mean absolute error in meters."""
    p, t = _clean_pair(pred, truth)
    return float(np.mean(np.abs(p - t)))


def r2(pred, truth) -> float:
    """Coefficient of determination, 1 - SS_res/SS_tot about the truth mean."""
    p, t = _clean_pair(pred, truth)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise ZeroVariance("r2 is undefined for constant truth")
    ss_res = float(np.sum((p - t) ** 2))
    return 1.0 - ss_res / ss_tot


def spatial_mean_abs_error(predictions: dict, truths: dict, point_ids=None) -> dict:
    """Average absolute error at each point across storms.

    ``predictions``/``truths`` map storm_id -> {point_id: value}, with NaN (or
    None) for DRY. Points missing from a storm are skipped for that storm but
    counted; a point with no data in any storm raises :class:`NoData`.
    """
    sums: dict = {}
    counts: dict = {}
    for storm, pred_map in predictions.items():
        truth_map = truths.get(storm, {})
        for pid, pv in pred_map.items():
            if pid not in truth_map:
                continue
            tv = truth_map[pid]
            pv = 0.0 if pv is None or (isinstance(pv, float) and math.isnan(pv)) else float(pv)
            tv = 0.0 if tv is None or (isinstance(tv, float) and math.isnan(tv)) else float(tv)
            sums[pid] = sums.get(pid, 0.0) + abs(pv - tv)
            counts[pid] = counts.get(pid, 0) + 1
    if point_ids is None:
        point_ids = sorted(sums)
    out = {}
    for pid in point_ids:
        if counts.get(pid, 0) == 0:
            raise NoData(pid)
        out[pid] = sums[pid] / counts[pid]
    return out


def station_rmse(event_pairs: dict) -> dict:
    """Per-station RMSE over event-peak (prediction, observation) pairs."""
    out = {}
    for station, pairs in event_pairs.items():
        if not pairs:
            raise NoEvents(station)
        pred = np.array([p for p, _ in pairs], dtype=np.float64)
        obs = np.array([o for _, o in pairs], dtype=np.float64)
        out[station] = rmse(pred, obs)
    return out


# ---------------------------------------------------------------------------
# Reports


@dataclass
class MetricReport:
    r2: float
    rmse: float
    mae: float
    n: int
    per_point_mae: dict = field(default_factory=dict)
    per_station_rmse: dict = field(default_factory=dict)


def compute_report(pred, truth, per_point_mae=None, per_station_rmse=None) -> MetricReport:
    p, t = _clean_pair(pred, truth)
    return MetricReport(r2(p, t), rmse(p, t), mae(p, t), len(p),
                        per_point_mae or {}, per_station_rmse or {})


def report_to_json(report: MetricReport) -> str:
    payload = {
        "r2": report.r2,
        "rmse": report.rmse,
        "mae": report.mae,
        "n": report.n,
        "per_point_mae": {str(k): v for k, v in report.per_point_mae.items()},
        "per_station_rmse": dict(report.per_station_rmse),
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def report_to_csv(report: MetricReport) -> str:
    out = ["metric,value",
           f"r2,{fmt(report.r2)}",
           f"rmse,{fmt(report.rmse)}",
           f"mae,{fmt(report.mae)}",
           f"n,{report.n}",
           "",
           "point_id,mae"]
    for pid in sorted(report.per_point_mae):
        out.append(f"{pid},{fmt(report.per_point_mae[pid])}")
    out.append("")
    out.append("station,rmse")
    for station in sorted(report.per_station_rmse):
        out.append(f"{station},{fmt(report.per_station_rmse[station])}")
    return "\n".join(out) + "\n"


def write_metric_report(report: MetricReport, json_path, csv_path=None) -> None:
    Path(json_path).write_text(report_to_json(report))
    if csv_path is not None:
        Path(csv_path).write_text(report_to_csv(report))


def write_error_geojson(per_point_mae: dict, points, path) -> None:
    """Per-point absolute errors as GeoJSON points with an ``abs_err`` property."""
    feats = []
    for pid in sorted(per_point_mae):
        row = points.row_of(pid)
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point",
                         "coordinates": [float(points.lon[row]), float(points.lat[row])]},
            "properties": {"point_id": int(pid), "abs_err": float(per_point_mae[pid])},
        })
    doc = {"type": "FeatureCollection", "features": feats}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
