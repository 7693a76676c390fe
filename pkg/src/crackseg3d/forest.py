"""Voxelwise random-forest classification over the feature bank.

Trees are CART classifiers (Gini impurity, sqrt-of-features subsampling per
split) trained on bootstrap resamples; prediction is a majority vote over
hard per-tree classifications with ties going to background.  The feature
order is serialized with the forest and enforced at prediction time.
"""

import pickle
from dataclasses import dataclass, field

import numpy as np
from sklearn.tree import DecisionTreeClassifier

from .errors import ContractError, CorruptFileError, ParameterError, TrainingError
from .features import FeatureBankConfig, feature_bank, feature_names

__all__ = [
    "TrainingSet",
    "Forest",
    "assemble_training",
    "train_forest",
    "predict_forest",
    "predict_features",
    "save_forest",
    "load_forest",
]

_FORMAT_VERSION = 1


@dataclass
class TrainingSet:
    features: np.ndarray        # (rows, n_features) float32
    labels: np.ndarray          # (rows,) uint8
    bank: FeatureBankConfig
    crack_rows: int
    background_rows: int


@dataclass
class Forest:
    trees: list
    bank: FeatureBankConfig
    metadata: dict = field(default_factory=dict)

    @property
    def feature_order(self):
        return feature_names(self.bank)


def _stack_features(vol, bank):
    volumes = feature_bank(vol, bank)
    return np.stack([v.ravel() for v in volumes], axis=1).astype(np.float32)


def assemble_training(pairs, bank, crack_sample_cap=50_000, bg_ratio=4.0, seed=0):
    """Sample a class-rebalanced voxel training set from (gray, truth) pairs.

    Per pair: up to ``crack_sample_cap`` crack voxels and ``bg_ratio`` times
    as many background voxels, uniformly at random without replacement.
    """
    if not pairs:
        raise TrainingError("need at least one (volume, truth) pair")
    rng = np.random.default_rng(seed)
    feats = []
    labels = []
    crack_rows = 0
    background_rows = 0
    for vol, truth in pairs:
        truth = np.asarray(truth, dtype=bool)
        if vol.shape != truth.shape:
            raise TrainingError(f"pair dims mismatch: {vol.shape} vs {truth.shape}")
        matrix = _stack_features(vol, bank)
        flat_truth = truth.ravel()
        crack_idx = np.flatnonzero(flat_truth)
        bg_idx = np.flatnonzero(~flat_truth)
        n_crack = min(len(crack_idx), crack_sample_cap)
        if n_crack:
            crack_idx = rng.choice(crack_idx, size=n_crack, replace=False)
            n_bg = min(len(bg_idx), int(round(bg_ratio * n_crack)))
            bg_sel = rng.choice(bg_idx, size=n_bg, replace=False)
            feats.append(matrix[crack_idx])
            labels.append(np.ones(n_crack, dtype=np.uint8))
            feats.append(matrix[bg_sel])
            labels.append(np.zeros(n_bg, dtype=np.uint8))
            crack_rows += n_crack
            background_rows += n_bg
    if crack_rows == 0:
        raise TrainingError("no crack voxels in any training pair")
    return TrainingSet(
        features=np.concatenate(feats),
        labels=np.concatenate(labels),
        bank=bank,
        crack_rows=crack_rows,
        background_rows=background_rows,
    )


def train_forest(ts, n_dt=100, d_dt=50, seed=0, bootstrap=True, max_features="sqrt"):
    """Train ``n_dt`` Gini CART trees of depth at most ``d_dt``.

    Each tree sees a bootstrap resample of the training rows (drawn with
    replacement up to the original size) and subsamples sqrt(d) candidate
    features per split.  Fully deterministic given the seed.
    """
    if n_dt < 1 or d_dt < 1:
        raise ParameterError("n_dt and d_dt must be >= 1")
    rng = np.random.default_rng(seed)
    rows = len(ts.labels)
    trees = []
    for _ in range(n_dt):
        if bootstrap:
            idx = rng.integers(0, rows, size=rows)
        else:
            idx = np.arange(rows)
        tree = DecisionTreeClassifier(
            criterion="gini",
            max_depth=d_dt,
            max_features=max_features,
            random_state=int(rng.integers(0, 2**31 - 1)),
        )
        tree.fit(ts.features[idx], ts.labels[idx])
        trees.append(tree)
    metadata = {
        "seed": seed,
        "n_dt": n_dt,
        "d_dt": d_dt,
        "bootstrap": bootstrap,
        "max_features": max_features,
        "split_criterion": "gini",
        "crack_rows": ts.crack_rows,
        "background_rows": ts.background_rows,
        "feature_order": feature_names(ts.bank),
    }
    return Forest(trees=trees, bank=ts.bank, metadata=metadata)


def _vote(trees, matrix):
    votes = np.zeros(len(matrix), dtype=np.int32)
    for tree in trees:
        votes += tree.predict(matrix).astype(np.int32)
    # strict majority; ties go to background
    return 2 * votes > len(trees)


def predict_features(forest, matrix):
    """Majority-vote prediction on an already-assembled feature matrix."""
    if matrix.shape[1] != len(forest.feature_order):
        raise ContractError(
            f"feature matrix has {matrix.shape[1]} columns, forest expects "
            f"{len(forest.feature_order)}"
        )
    return _vote(forest.trees, matrix)


def predict_forest(forest, vol, bank=None):
    """Classify each voxel of a volume with the forest's own feature bank."""
    if bank is not None and feature_names(bank) != forest.feature_order:
        raise ContractError("feature-bank config does not match forest metadata")
    matrix = _stack_features(vol, forest.bank)
    return predict_features(forest, matrix).reshape(vol.shape)


def save_forest(path, forest):
    payload = {
        "version": _FORMAT_VERSION,
        "bank": forest.bank.to_dict(),
        "metadata": forest.metadata,
        "trees": forest.trees,
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh)


def load_forest(path):
    try:
        with open(path, "rb") as fh:
            payload = pickle.load(fh)
    except (EOFError, pickle.UnpicklingError) as exc:
        raise CorruptFileError(f"unreadable forest file {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("version") != _FORMAT_VERSION:
        raise ContractError(f"unsupported forest file version in {path}")
    bank = FeatureBankConfig.from_dict(payload["bank"])
    forest = Forest(trees=payload["trees"], bank=bank, metadata=payload["metadata"])
    if forest.metadata.get("feature_order") != feature_names(bank):
        raise ContractError(f"feature order mismatch in {path}")
    return forest
