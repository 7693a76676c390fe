"""Tolerance metrics, coordinate grid search, and report aggregation."""

import csv
import itertools
import json

import numpy as np
import pytest

from crackseg3d import (
    ConfusionCounts,
    GridSpec,
    Metrics,
    ParameterError,
    ShapeError,
    confusion_with_tolerance,
    coordinate_grid_search,
    evaluate_pair,
    report,
)
from crackseg3d.evaluate import prf1


# ---------------------------------------------------------------------------
# Oracle: all-pairs squared distances, no distance transform
# ---------------------------------------------------------------------------

def oracle_confusion(pred, truth, tol):
    pred_pts = np.argwhere(pred)
    truth_pts = np.argwhere(truth)
    tol2 = tol * tol

    def within(points, targets):
        if len(targets) == 0:
            return np.zeros(len(points), dtype=bool)
        d2 = ((points[:, None, :] - targets[None, :, :]) ** 2).sum(axis=2)
        return d2.min(axis=1) <= tol2

    tp = int(within(truth_pts, pred_pts).sum())
    fp = int((~within(pred_pts, truth_pts)).sum())
    fn = len(truth_pts) - tp
    tn = pred.size - tp - fp - fn
    return tp, fp, fn, tn


def test_confusion_matches_bruteforce_oracle():
    rng = np.random.default_rng(0)
    for trial in range(20):
        pred = rng.random((9, 9, 9)) < 0.08
        truth = rng.random((9, 9, 9)) < 0.08
        for tol in (0, 1, 2):
            c = confusion_with_tolerance(pred, truth, tol)
            want = oracle_confusion(pred, truth, tol)
            assert (c.tp, c.fp, c.fn, c.tn) == want, (trial, tol)


def test_confusion_tol_zero_is_exact_overlap():
    rng = np.random.default_rng(1)
    pred = rng.random((8, 8, 8)) < 0.2
    truth = rng.random((8, 8, 8)) < 0.2
    c = confusion_with_tolerance(pred, truth, 0)
    assert c.tp == int((pred & truth).sum())
    assert c.fp == int((pred & ~truth).sum())
    assert c.fn == int((~pred & truth).sum())


def test_confusion_counts_sum_to_volume():
    rng = np.random.default_rng(2)
    pred = rng.random((7, 7, 7)) < 0.1
    truth = rng.random((7, 7, 7)) < 0.1
    for tol in (0, 1, 3):
        c = confusion_with_tolerance(pred, truth, tol)
        assert c.tp + c.fp + c.fn + c.tn == pred.size


def test_tolerance_is_euclidean_not_chebyshev():
    pred = np.zeros((7, 7, 7), bool)
    truth = np.zeros((7, 7, 7), bool)
    pred[3, 3, 3] = True
    truth[4, 4, 3] = True        # distance sqrt(2) ~ 1.414
    c1 = confusion_with_tolerance(pred, truth, 1)
    assert c1.tp == 0 and c1.fp == 1
    c2 = confusion_with_tolerance(pred, truth, 2)
    assert c2.tp == 1 and c2.fp == 0


def test_confusion_validation():
    with pytest.raises(ShapeError):
        confusion_with_tolerance(
            np.zeros((3, 3, 3), bool), np.zeros((3, 3, 4), bool), 1
        )
    with pytest.raises(ParameterError):
        confusion_with_tolerance(
            np.zeros((3, 3, 3), bool), np.zeros((3, 3, 3), bool), -1
        )


# ---------------------------------------------------------------------------
# Precision / recall conventions
# ---------------------------------------------------------------------------

def test_prf1_zero_conventions():
    # both empty: perfect
    m = prf1(ConfusionCounts(tp=0, fp=0, fn=0, tn=100, tol=0))
    assert (m.precision, m.recall, m.f1) == (1.0, 1.0, 1.0)
    # empty prediction, cracks missed
    m = prf1(ConfusionCounts(tp=0, fp=0, fn=5, tn=95, tol=0))
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)
    # empty truth, spurious prediction
    m = prf1(ConfusionCounts(tp=0, fp=5, fn=0, tn=95, tol=0))
    assert (m.precision, m.recall, m.f1) == (0.0, 0.0, 0.0)


def test_prf1_ordinary_case():
    m = prf1(ConfusionCounts(tp=8, fp=2, fn=2, tn=88, tol=1))
    assert m.precision == pytest.approx(0.8)
    assert m.recall == pytest.approx(0.8)
    assert m.f1 == pytest.approx(0.8)


def test_evaluate_pair_perfect_match():
    mask = np.random.default_rng(3).random((6, 6, 6)) < 0.3
    m = evaluate_pair(mask, mask, 0)
    assert m.f1 == 1.0


# ---------------------------------------------------------------------------
# Coordinate grid search
# ---------------------------------------------------------------------------

def make_threshold_problem():
    """1d separable toy: segmenting vol < t against a fixed truth."""
    rng = np.random.default_rng(4)
    vol = (rng.random((8, 8, 8)) * 100).astype(np.float32)
    truth = vol < 30.0

    def segmenter(v, params):
        return v < params["t"]

    return segmenter, (vol, truth)


def test_grid_search_finds_exhaustive_best_single_param():
    segmenter, pair = make_threshold_problem()
    values = [10.0, 20.0, 30.0, 50.0, 80.0]
    grid = GridSpec(params={"t": values}, objective="f1")
    result = coordinate_grid_search(segmenter, pair, grid, 0)
    # oracle: try every candidate
    scores = {
        t: evaluate_pair(segmenter(pair[0], {"t": t}), pair[1], 0).f1 for t in values
    }
    assert result.best_params["t"] == max(scores, key=scores.get)
    assert result.best_metrics.f1 == max(scores.values())
    assert len(result.trace) == len(values)
    assert result.constraint_met


def test_grid_search_sweeps_in_declared_order():
    calls = []

    def segmenter(v, params):
        calls.append(dict(params))
        return v < params["a"] * params["b"]

    rng = np.random.default_rng(5)
    vol = rng.random((5, 5, 5)).astype(np.float32)
    truth = vol < 0.4
    grid = GridSpec(params={"a": [0.5, 1.0], "b": [0.2, 0.6, 1.0]}, objective="f1")
    result = coordinate_grid_search(segmenter, (vol, truth), grid, 0)
    # sweep 1 varies a with b at its first value; sweep 2 varies b with the
    # incumbent a
    assert [c["b"] for c in calls[:2]] == [0.2, 0.2]
    assert [c["a"] for c in calls[2:]] == [result.best_params["a"]] * 3
    assert len(calls) == 5


def test_grid_search_constraint_filters_candidates():
    segmenter, pair = make_threshold_problem()
    grid = GridSpec(
        params={"t": [10.0, 30.0, 90.0]}, objective="precision", constraint=0.99
    )
    result = coordinate_grid_search(segmenter, pair, grid, 0)
    # precision alone would pick the tiniest threshold; recall >= 0.99
    # forces t >= 30
    assert result.best_params["t"] >= 30.0
    assert result.constraint_met
    assert result.best_metrics.recall >= 0.99


def test_grid_search_infeasible_constraint_flagged():
    segmenter, pair = make_threshold_problem()
    grid = GridSpec(params={"t": [1.0, 2.0]}, objective="precision", constraint=0.999)
    result = coordinate_grid_search(segmenter, pair, grid, 0)
    assert not result.constraint_met
    # still returns the unconstrained best of the sweep
    assert result.best_params["t"] in (1.0, 2.0)


def test_grid_search_f1_constraint_uses_min_of_p_and_r():
    metrics = Metrics(precision=0.9, recall=0.4, f1=0.55)
    from crackseg3d.evaluate import _complement_value

    assert _complement_value(metrics, "f1") == 0.4
    assert _complement_value(metrics, "precision") == 0.4
    assert _complement_value(metrics, "recall") == 0.9


def test_grid_spec_validation():
    with pytest.raises(ParameterError):
        GridSpec(params={"t": [1.0]}, objective="accuracy")
    with pytest.raises(ParameterError):
        GridSpec(params={})
    with pytest.raises(ParameterError):
        GridSpec(params={"t": []})


# ---------------------------------------------------------------------------
# Report
# ---------------------------------------------------------------------------

def sample_rows():
    rows = []
    for image, f1 in (("a", 0.8), ("b", 0.6), ("c", 1.0)):
        rows.append(
            ("sheet", 3, image, 1, Metrics(precision=f1, recall=f1, f1=f1))
        )
    rows.append(("sheet", 3, "a", 0, Metrics(precision=0.5, recall=0.5, f1=0.5)))
    return rows


def test_report_csv_schema(tmp_path):
    path = tmp_path / "m.csv"
    report(sample_rows(), csv_path=path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["method", "width", "image_id", "tol", "precision", "recall", "f1"]
    assert len(rows) == 5
    assert rows[1][:4] == ["sheet", "3", "a", "1"]


def test_report_summary_statistics(tmp_path):
    path = tmp_path / "s.json"
    summary = report(sample_rows(), summary_path=path)
    on_disk = json.loads(path.read_text())
    assert on_disk == json.loads(json.dumps(summary))
    groups = {(e["method"], e["width"], e["tol"]): e for e in summary}
    g = groups[("sheet", 3, 1)]
    values = [0.8, 0.6, 1.0]
    assert g["n"] == 3
    assert g["f1"]["mean"] == pytest.approx(np.mean(values))
    assert g["f1"]["std"] == pytest.approx(np.std(values))        # ddof=0
    assert g["f1"]["median"] == pytest.approx(np.median(values))
    assert g["f1"]["min"] == 0.6 and g["f1"]["max"] == 1.0
    assert g["f1"]["q1"] == pytest.approx(np.quantile(values, 0.25))
    assert ("sheet", 3, 0) in groups


def test_report_empty_rows_rejected():
    with pytest.raises(ParameterError):
        report([])
