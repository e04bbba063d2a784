"""KNN tests: exhaustive-sort oracle, tie rules, standardization."""

import numpy as np
import pytest

from ssbwatch.knn import (
    MODE_PCA,
    MODE_STANDARDIZED,
    KnnModel,
    fit_standardizer,
    knn_grid_eval,
    knn_predict,
    knn_predict_batch,
    load_knn,
    save_knn,
)
from ssbwatch.radio import ChannelParams, RadioConfig
from ssbwatch.spectrogram import SpectrogramParams, build_dataset


def oracle_predict(points, labels, k, x):
    """Exhaustive sort with explicit (distance, index) keys; the reference route."""
    keyed = sorted((float(np.sum((p - x) ** 2)), i) for i, p in enumerate(points))
    votes = sum(labels[i] for _, i in keyed[:k])
    return 1 if votes > k - votes else 0


def test_standardizer_basics():
    data = np.array([[1.0, -1.0, 5.0], [1.0, 1.0, 7.0]])
    std = fit_standardizer(data)
    out = std.apply(data)
    np.testing.assert_allclose(out[:, 0], 0.0)          # constant feature -> 0, std snapped to 1
    assert std.std[0] == 1.0
    np.testing.assert_allclose(out[:, 1], [-1.0, 1.0])  # already unit variance
    np.testing.assert_allclose(out[:, 2], [-1.0, 1.0])


def test_standardizer_recomputation_oracle():
    rng = np.random.default_rng(0)
    data = rng.standard_normal((5, 3)) * np.array([2.0, 0.5, 9.0]) + 1.5
    std = fit_standardizer(data)
    out = std.apply(data)
    assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
    np.testing.assert_allclose(out.var(axis=0), 1.0, atol=1e-9)
    with pytest.raises(ValueError):
        fit_standardizer(data[:1])


def test_k1_returns_training_point_label():
    rng = np.random.default_rng(1)
    points = rng.standard_normal((10, 3))
    labels = rng.integers(0, 2, 10)
    model = KnnModel(points, labels, k=1, mode=MODE_PCA)
    for i in range(10):
        pred, frac = knn_predict(model, points[i])
        assert pred == labels[i]
        assert frac == float(labels[i])


def test_k_equals_n_gives_global_majority():
    rng = np.random.default_rng(2)
    points = rng.standard_normal((7, 2))
    labels = np.array([1, 1, 1, 1, 0, 0, 0])
    model = KnnModel(points, labels, k=7, mode=MODE_PCA)
    for x in rng.standard_normal((5, 2)):
        pred, frac = knn_predict(model, x)
        assert pred == 1
        assert frac == pytest.approx(4 / 7)


def test_two_cluster_set_matches_oracle_leave_one_out():
    points = np.array([[0.0, 0], [0.1, 0], [-0.1, 0], [5.0, 5], [5.1, 5], [4.9, 5]])
    labels = np.array([0, 0, 0, 1, 1, 1])
    for i in range(6):
        mask = np.arange(6) != i
        model = KnnModel(points[mask], labels[mask], k=3, mode=MODE_PCA)
        pred, _ = knn_predict(model, points[i])
        assert pred == oracle_predict(points[mask], labels[mask], 3, points[i])
        assert pred == labels[i]


def test_matches_oracle_on_random_queries():
    rng = np.random.default_rng(3)
    points = rng.standard_normal((50, 4))
    labels = rng.integers(0, 2, 50)
    model = KnnModel(points, labels, k=5, mode=MODE_PCA)
    queries = rng.standard_normal((200, 4))
    batch_pred, _ = knn_predict_batch(model, queries)
    for q, expected_batch in zip(queries, batch_pred):
        single, _ = knn_predict(model, q)
        assert single == oracle_predict(points, labels, 5, q)
        assert single == expected_batch


def test_distance_tie_breaks_to_lower_index():
    # integer coordinates make the two distances exactly equal in float
    points = np.array([[1.0, 0.0], [-1.0, 0.0], [3.0, 0.0]])
    labels = np.array([1, 0, 1])
    model = KnnModel(points, labels, k=1, mode=MODE_PCA)
    pred, _ = knn_predict(model, np.array([0.0, 0.0]))
    assert pred == 1  # index 0 wins the tie
    swapped = KnnModel(points[[1, 0, 2]], labels[[1, 0, 2]], k=1, mode=MODE_PCA)
    pred, _ = knn_predict(swapped, np.array([0.0, 0.0]))
    assert pred == 0


def test_even_vote_tie_resolves_benign():
    points = np.array([[1.0], [-1.0], [2.0], [-2.0]])
    labels = np.array([1, 0, 1, 0])
    model = KnnModel(points, labels, k=2, mode=MODE_PCA)
    pred, frac = knn_predict(model, np.array([0.0]))
    assert pred == 0
    assert frac == pytest.approx(0.5)


def test_permutation_invariance_on_tie_free_data():
    rng = np.random.default_rng(4)
    points = rng.standard_normal((30, 3))
    labels = rng.integers(0, 2, 30)
    queries = rng.standard_normal((20, 3))
    model = KnnModel(points, labels, k=5, mode=MODE_PCA)
    base, _ = knn_predict_batch(model, queries)
    perm = rng.permutation(30)
    permuted = KnnModel(points[perm], labels[perm], k=5, mode=MODE_PCA)
    again, _ = knn_predict_batch(permuted, queries)
    assert np.array_equal(base, again)


def test_duplicate_of_query_dominates_k1():
    rng = np.random.default_rng(5)
    points = rng.standard_normal((10, 2))
    labels = np.zeros(10, dtype=int)
    query = np.array([0.3, -0.2])
    grown = KnnModel(np.vstack([points, query]), np.append(labels, 1), k=1, mode=MODE_PCA)
    pred, _ = knn_predict(grown, query)
    assert pred == 1


def test_model_validation():
    with pytest.raises(ValueError):
        KnnModel(np.zeros((3, 2)), np.zeros(3), k=0, mode=MODE_PCA)
    with pytest.raises(ValueError):
        KnnModel(np.zeros((3, 2)), np.zeros(3), k=4, mode=MODE_PCA)
    with pytest.raises(ValueError):
        KnnModel(np.zeros((3, 2)), np.zeros(3), k=1, mode="cosine")


@pytest.fixture(scope="module")
def tiny_dataset():
    params = SpectrogramParams(window_size=128, stack_depth=8)
    counts = {"train": (6, 6, 6), "validation": (3, 3, 3), "test": (3, 3, 3)}
    return build_dataset(RadioConfig(), ChannelParams(), params, counts, seed=11)


def test_grid_eval_shapes_and_k1_train_accuracy(tiny_dataset):
    result = knn_grid_eval(tiny_dataset, [1, 2, 3], MODE_STANDARDIZED)
    assert set(result.accuracy) == {1, 2, 3}
    # duplicate-free training data: each point is its own nearest neighbor
    assert result.accuracy[1]["train"] == pytest.approx(100.0)
    assert result.best_k in (1, 2, 3)

    pca_result = knn_grid_eval(tiny_dataset, [1, 2, 3], MODE_PCA)
    assert pca_result.accuracy[1]["train"] == pytest.approx(100.0)


def test_grid_eval_degenerate_single_class():
    params = SpectrogramParams(window_size=128, stack_depth=8)
    counts = {"train": (4, 0, 0), "validation": (2, 0, 0), "test": (2, 0, 0)}
    ds = build_dataset(RadioConfig(), ChannelParams(), params, counts, seed=12)
    result = knn_grid_eval(ds, [1, 3], MODE_STANDARDIZED)
    for k in (1, 3):
        for split in ("train", "validation", "test"):
            assert result.accuracy[k][split] == pytest.approx(100.0)


def test_save_load_round_trip(tmp_path, tiny_dataset):
    result = knn_grid_eval(tiny_dataset, [1, 3], MODE_PCA)
    from ssbwatch.pca import fit_pca, project

    psd, labels = tiny_dataset.averaged_psds("train")
    pca = fit_pca(psd, 8)
    model = KnnModel(project(pca, psd), labels, k=result.best_k, mode=MODE_PCA, pca=pca)
    save_knn(model, tmp_path / "m.knn")
    back = load_knn(tmp_path / "m.knn")
    assert back.k == model.k and back.mode == model.mode
    test_psd, test_labels = tiny_dataset.averaged_psds("test")
    a, fa = knn_predict_batch(model, model.preprocess(test_psd))
    b, fb = knn_predict_batch(back, back.preprocess(test_psd))
    assert np.array_equal(a, b)
    np.testing.assert_allclose(fa, fb)

    std = fit_standardizer(psd)
    smodel = KnnModel(std.apply(psd), labels, k=2, mode=MODE_STANDARDIZED, standardizer=std)
    save_knn(smodel, tmp_path / "s.knn")
    sback = load_knn(tmp_path / "s.knn")
    a, _ = knn_predict_batch(smodel, smodel.preprocess(test_psd))
    b, _ = knn_predict_batch(sback, sback.preprocess(test_psd))
    assert np.array_equal(a, b)
