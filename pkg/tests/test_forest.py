"""Random-forest voxel classification."""

import numpy as np
import pytest

from crackseg3d import (
    CompositeParams,
    ContractError,
    CorruptFileError,
    CrackSpec,
    FeatureBankConfig,
    ParameterError,
    PhantomSpec,
    TrainingError,
    assemble_training,
    build_crack_mask,
    composite,
    load_forest,
    predict_forest,
    save_forest,
    synthesize_background,
    train_forest,
)
from crackseg3d.forest import TrainingSet, _vote, predict_features


# ---------------------------------------------------------------------------
# Oracle: exhaustive-split Gini CART on tiny datasets
# ---------------------------------------------------------------------------

def gini(labels):
    if len(labels) == 0:
        return 0.0
    p = np.mean(labels)
    return 2.0 * p * (1.0 - p)


def best_split(x, y):
    """Exhaustively search (feature, threshold) minimizing weighted Gini."""
    n, d = x.shape
    best = (None, None, gini(y))
    for j in range(d):
        values = np.unique(x[:, j])
        for lo, hi in zip(values[:-1], values[1:]):
            thr = (lo + hi) / 2.0
            left = y[x[:, j] <= thr]
            right = y[x[:, j] > thr]
            score = (len(left) * gini(left) + len(right) * gini(right)) / n
            if score < best[2] - 1e-12:
                best = (j, thr, score)
    return best


def cart_predict(x, y, queries, max_depth):
    """Recursive exhaustive CART prediction (majority leaf)."""
    def grow(idx, depth):
        labels = y[idx]
        if depth == max_depth or gini(labels) == 0.0:
            return ("leaf", labels.mean() > 0.5)
        j, thr, _ = best_split(x[idx], labels)
        if j is None:
            return ("leaf", labels.mean() > 0.5)
        left = idx[x[idx, j] <= thr]
        right = idx[x[idx, j] > thr]
        return ("node", j, thr, grow(left, depth + 1), grow(right, depth + 1))

    root = grow(np.arange(len(y)), 0)

    def walk(node, q):
        if node[0] == "leaf":
            return node[1]
        _, j, thr, left, right = node
        return walk(left if q[j] <= thr else right, q)

    return np.array([walk(root, q) for q in queries])


def tiny_bank():
    return FeatureBankConfig(
        gaussian_sigmas=(0.5,),
        log_sigmas=(0.5,),
        gradient_sigmas=(0.5,),
        dog_pairs=(),
        hessian_sigmas=(0.5,),
        structure_sigmas=(),
    )


def toy_pair(seed=0, side=24):
    spec = CrackSpec(n=5, width=3, arrangement="single", seed=seed)
    mask = build_crack_mask(spec)[:side, :side, :side]
    bg = synthesize_background(PhantomSpec(dims=(side, side, side), seed=seed + 100))
    vol = composite(bg, mask, CompositeParams(seed=seed + 200))
    return vol, mask


# ---------------------------------------------------------------------------
# Single-tree behaviour against the oracle
# ---------------------------------------------------------------------------

def test_single_full_tree_matches_exhaustive_cart():
    # one tree, no bootstrap, all features per split: sklearn's CART and the
    # exhaustive oracle agree on separable data
    rng = np.random.default_rng(0)
    x = rng.random((60, 3)).astype(np.float32)
    y = ((x[:, 0] > 0.5) & (x[:, 1] > 0.3)).astype(np.uint8)
    ts = TrainingSet(
        features=x, labels=y, bank=tiny_bank(),
        crack_rows=int(y.sum()), background_rows=int((1 - y).sum()),
    )
    forest = train_forest(ts, n_dt=1, d_dt=10, seed=0, bootstrap=False,
                          max_features=None)
    queries = rng.random((200, 3)).astype(np.float32)
    got = _vote(forest.trees, queries)
    want = cart_predict(x, y, queries, max_depth=10)
    # trained on separable data both reproduce the training labels exactly
    np.testing.assert_array_equal(_vote(forest.trees, x), y.astype(bool))
    assert np.mean(got == want) > 0.95  # trees may differ on ambiguous cells


def test_depth_limit_is_respected():
    rng = np.random.default_rng(1)
    x = rng.random((200, 4)).astype(np.float32)
    y = (rng.random(200) < 0.5).astype(np.uint8)
    ts = TrainingSet(x, y, tiny_bank(), int(y.sum()), int((1 - y).sum()))
    forest = train_forest(ts, n_dt=3, d_dt=2, seed=0)
    for tree in forest.trees:
        assert tree.get_depth() <= 2


def test_vote_majority_and_tie_to_background():
    class Fixed:
        def __init__(self, value):
            self.value = value

        def predict(self, m):
            return np.full(len(m), self.value, dtype=np.uint8)

    m = np.zeros((4, 2))
    assert _vote([Fixed(1), Fixed(1), Fixed(0)], m).all()        # 2/3 majority
    assert not _vote([Fixed(1), Fixed(0)], m).any()              # tie -> 0
    assert not _vote([Fixed(0), Fixed(0), Fixed(1)], m).any()


def test_training_is_deterministic():
    vol, mask = toy_pair(0)
    bank = tiny_bank()
    ts1 = assemble_training([(vol, mask)], bank, crack_sample_cap=300, seed=5)
    ts2 = assemble_training([(vol, mask)], bank, crack_sample_cap=300, seed=5)
    np.testing.assert_array_equal(ts1.features, ts2.features)
    f1 = train_forest(ts1, n_dt=3, d_dt=8, seed=9)
    f2 = train_forest(ts2, n_dt=3, d_dt=8, seed=9)
    np.testing.assert_array_equal(predict_forest(f1, vol), predict_forest(f2, vol))


# ---------------------------------------------------------------------------
# Training-set assembly
# ---------------------------------------------------------------------------

def test_assemble_respects_cap_and_ratio():
    vol, mask = toy_pair(1)
    ts = assemble_training(
        [(vol, mask)], tiny_bank(), crack_sample_cap=200, bg_ratio=3.0, seed=0
    )
    assert ts.crack_rows == 200
    assert ts.background_rows == 600
    assert ts.features.shape == (800, len(ts.bank.gaussian_sigmas) + 1 + 1 + 9)
    assert set(np.unique(ts.labels)) == {0, 1}


def test_assemble_small_crack_takes_all():
    vol, mask = toy_pair(2)
    total_crack = int(mask.sum())
    ts = assemble_training(
        [(vol, mask)], tiny_bank(), crack_sample_cap=10**9, bg_ratio=0.5, seed=0
    )
    assert ts.crack_rows == total_crack


def test_assemble_without_cracks_raises():
    vol = np.zeros((8, 8, 8), np.float32)
    with pytest.raises(TrainingError):
        assemble_training([(vol, np.zeros_like(vol, bool))], tiny_bank())


def test_train_validates_counts():
    vol, mask = toy_pair(3)
    ts = assemble_training([(vol, mask)], tiny_bank(), crack_sample_cap=50)
    with pytest.raises(ParameterError):
        train_forest(ts, n_dt=0)
    with pytest.raises(ParameterError):
        train_forest(ts, d_dt=0)


# ---------------------------------------------------------------------------
# End-to-end separation and serialization
# ---------------------------------------------------------------------------

def test_forest_overfits_a_training_volume():
    vol, mask = toy_pair(4)
    ts = assemble_training([(vol, mask)], tiny_bank(), crack_sample_cap=2000,
                           bg_ratio=4.0, seed=0)
    forest = train_forest(ts, n_dt=20, d_dt=20, seed=0)
    pred = predict_forest(forest, vol)
    tp = (pred & mask).sum()
    assert tp / mask.sum() > 0.9
    assert (pred & ~mask).sum() / (~mask).sum() < 0.05


def test_predict_features_checks_column_count():
    vol, mask = toy_pair(5)
    ts = assemble_training([(vol, mask)], tiny_bank(), crack_sample_cap=100)
    forest = train_forest(ts, n_dt=2, d_dt=5, seed=0)
    with pytest.raises(ContractError):
        predict_features(forest, np.zeros((10, 3), np.float32))


def test_predict_rejects_mismatched_bank():
    vol, mask = toy_pair(6)
    ts = assemble_training([(vol, mask)], tiny_bank(), crack_sample_cap=100)
    forest = train_forest(ts, n_dt=2, d_dt=5, seed=0)
    with pytest.raises(ContractError):
        predict_forest(forest, vol, bank=FeatureBankConfig())


def test_save_load_roundtrip(tmp_path):
    vol, mask = toy_pair(7)
    ts = assemble_training([(vol, mask)], tiny_bank(), crack_sample_cap=200)
    forest = train_forest(ts, n_dt=3, d_dt=8, seed=1)
    path = tmp_path / "forest.bin"
    save_forest(path, forest)
    back = load_forest(path)
    assert back.metadata == forest.metadata
    assert back.bank == forest.bank
    np.testing.assert_array_equal(predict_forest(back, vol), predict_forest(forest, vol))


def test_load_truncated_file_raises_corrupt(tmp_path):
    vol, mask = toy_pair(8)
    ts = assemble_training([(vol, mask)], tiny_bank(), crack_sample_cap=100)
    forest = train_forest(ts, n_dt=2, d_dt=5, seed=0)
    path = tmp_path / "forest.bin"
    save_forest(path, forest)
    blob = path.read_bytes()
    path.write_bytes(blob[: len(blob) // 2])
    with pytest.raises(CorruptFileError):
        load_forest(path)


def test_load_wrong_version_raises_contract(tmp_path):
    import pickle

    path = tmp_path / "forest.bin"
    path.write_bytes(pickle.dumps({"version": 99}))
    with pytest.raises(ContractError):
        load_forest(path)
