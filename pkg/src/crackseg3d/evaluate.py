"""Tolerance-aware confusion counts, precision/recall/F1, grid-search
tuning, and report emission.

Tolerance uses Euclidean voxel-center distance: a true crack voxel within
``tol`` of some prediction counts as tp, a predicted voxel farther than
``tol`` from every true voxel counts as fp.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ParameterError, ShapeError

__all__ = [
    "ConfusionCounts",
    "Metrics",
    "GridSpec",
    "SearchResult",
    "confusion_with_tolerance",
    "prf1",
    "evaluate_pair",
    "coordinate_grid_search",
    "report",
]


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int
    tol: int


@dataclass
class Metrics:
    precision: float
    recall: float
    f1: float

    def get(self, name):
        return getattr(self, name)


def _squared_distance_to(mask):
    """Exact squared Euclidean distance to the nearest set voxel."""
    dist = ndimage.distance_transform_edt(~mask)
    return np.rint(dist * dist).astype(np.int64)


def confusion_with_tolerance(pred, truth, tol):
    """Tolerance-aware tp/fp/fn/tn counts between two masks."""
    pred = np.asarray(pred, dtype=bool)
    truth = np.asarray(truth, dtype=bool)
    if pred.shape != truth.shape:
        raise ShapeError(f"dims mismatch: {pred.shape} vs {truth.shape}")
    if tol < 0:
        raise ParameterError(f"tolerance must be >= 0, got {tol}")
    total = pred.size
    n_truth = int(truth.sum())
    n_pred = int(pred.sum())
    tol2 = tol * tol
    if n_pred == 0:
        tp, fp = 0, 0
    else:
        within_pred = _squared_distance_to(pred) <= tol2
        tp = int(np.count_nonzero(truth & within_pred))
    if n_truth == 0:
        fp = n_pred if n_pred else 0
    elif n_pred == 0:
        fp = 0
    else:
        within_truth = _squared_distance_to(truth) <= tol2
        fp = int(np.count_nonzero(pred & ~within_truth))
    fn = n_truth - tp
    tn = total - tp - fp - fn
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn, tol=tol)


def prf1(counts):
    """Precision, recall, F1 with explicit zero-division conventions.

    An empty class is scored perfect only when nothing was missed: P is 1
    when tp+fp = 0 and fn = 0 (else 0), R symmetric, and F1 = 0 when
    P + R = 0.
    """
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if fn == 0 else 0.0
    if tp + fn > 0:
        recall = tp / (tp + fn)
    else:
        recall = 1.0 if fp == 0 else 0.0
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
    return Metrics(precision=precision, recall=recall, f1=f1)


def evaluate_pair(pred, truth, tol):
    """Shortcut: metrics of a prediction against ground truth at one tol."""
    return prf1(confusion_with_tolerance(pred, truth, tol))


# ---------------------------------------------------------------------------
# Coordinate grid search
# ---------------------------------------------------------------------------

_COMPLEMENT = {"precision": "recall", "recall": "precision"}


@dataclass
class GridSpec:
    """Ordered per-parameter candidate lists plus the tuning objective.

    ``constraint`` is the minimum acceptable value of the complementary
    metric (recall when optimizing precision and vice versa; min(P, R) when
    optimizing f1).
    """

    params: dict                      # name -> list of candidate values
    objective: str = "f1"
    constraint: float = 0.0

    def __post_init__(self):
        if self.objective not in ("precision", "recall", "f1"):
            raise ParameterError(f"unknown objective {self.objective!r}")
        if not self.params or any(len(v) == 0 for v in self.params.values()):
            raise ParameterError("grids must be non-empty")


@dataclass
class SearchResult:
    best_params: dict
    best_metrics: Metrics
    trace: list = field(default_factory=list)   # (params dict, Metrics)
    constraint_met: bool = True


def _complement_value(metrics, objective):
    if objective in _COMPLEMENT:
        return metrics.get(_COMPLEMENT[objective])
    return min(metrics.precision, metrics.recall)


def coordinate_grid_search(segmenter, pair, grid, tol):
    """One coordinate sweep per parameter, in declared order.

    ``segmenter(params) -> mask`` is evaluated against the ground truth of
    ``pair`` = (volume, truth mask); each sweep fixes all other parameters
    at the incumbent values and keeps the candidate maximizing the objective
    among those meeting the constraint (falling back to the unconstrained
    best, flagged, if none does).
    """
    vol, truth = pair
    incumbent = {name: values[0] for name, values in grid.params.items()}
    trace = []
    best_metrics = None
    constraint_met = True
    for name, values in grid.params.items():
        sweep = []
        for value in values:
            params = dict(incumbent)
            params[name] = value
            mask = segmenter(vol, params)
            metrics = evaluate_pair(mask, truth, tol)
            trace.append((params, metrics))
            sweep.append((value, metrics))
        feasible = [
            s for s in sweep if _complement_value(s[1], grid.objective) >= grid.constraint
        ]
        pool = feasible if feasible else sweep
        if not feasible:
            constraint_met = False
        value, best_metrics = max(pool, key=lambda s: s[1].get(grid.objective))
        incumbent[name] = value
    return SearchResult(
        best_params=incumbent,
        best_metrics=best_metrics,
        trace=trace,
        constraint_met=constraint_met,
    )


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------

def _quantiles(values):
    arr = np.asarray(values, dtype=np.float64)
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0])
    return {"min": q[0], "q1": q[1], "median": q[2], "q3": q[3], "max": q[4]}


def report(results, csv_path=None, summary_path=None):
    """Aggregate per-image metric rows into CSV + summary JSON.

    ``results`` rows are (method, width, image_id, tol, Metrics).  The
    summary groups by (method, width, tol) and reports mean, population
    standard deviation, and box-plot quantiles per metric.
    """
    if not results:
        raise ParameterError("report needs at least one result row")
    header = ["method", "width", "image_id", "tol", "precision", "recall", "f1"]
    rows = [
        [method, width, image_id, tol, m.precision, m.recall, m.f1]
        for method, width, image_id, tol, m in results
    ]
    if csv_path is not None:
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    groups = {}
    for method, width, image_id, tol, metrics in results:
        groups.setdefault((method, width, tol), []).append(metrics)
    summary = []
    for (method, width, tol), members in sorted(groups.items(), key=lambda g: (
            str(g[0][0]), g[0][1], g[0][2])):
        entry = {"method": method, "width": width, "tol": tol, "n": len(members)}
        for metric in ("precision", "recall", "f1"):
            values = [m.get(metric) for m in members]
            entry[metric] = {
                "mean": float(np.mean(values)),
                "std": float(np.std(values)),
                **_quantiles(values),
            }
        summary.append(entry)
    if summary_path is not None:
        with open(summary_path, "w") as fh:
            json.dump(summary, fh, indent=2)
    return summary
