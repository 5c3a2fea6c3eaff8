"""Readout fitting against a closed-form ridge oracle, corruption laws, and the
batch/incremental equivalence."""

import numpy as np
import pytest

from aadetect.aadrnn import AadrnnModel, AadrnnShape
from aadetect.metrics import DimensionError
from aadetect.training import (SufficientStats, TrainConfig, TrainingError,
                               accumulate_pairs, corrupt, fit_batch,
                               fit_batch_with_stats, noise_rng, solve_readout,
                               update_incremental)


def hand_hidden(model, x):
    """Hidden activations via scalar loops only (independent of the library)."""
    h = list(map(float, x))
    for w in model.hidden_weights:
        nxt = []
        for i in range(w.shape[0]):
            pre = max(sum(w[i, j] * h[j] for j in range(w.shape[1])), 0.0)
            nxt.append(pre / (model.act.r + model.act.c * pre))
        h = nxt
    return np.array(h)


def oracle_readout(shape, X, cfg, salt=None):
    """Closed-form (H^T H + lambda I)^{-1} H^T X with H rebuilt from scratch:
    per-row keyed noise, scalar-loop hidden activations, explicit inverse."""
    model = AadrnnModel.initial(shape)
    H = []
    for i, row in enumerate(X):
        entropy = [cfg.seed, i] if salt is None else [cfg.seed, salt, i]
        rng = np.random.default_rng(entropy)
        noisy = np.maximum(row + rng.normal(0.0, cfg.noise_sigma, size=row.shape), 0.0)
        H.append(hand_hidden(model, noisy))
    H = np.array(H)
    A = H.T @ H + cfg.ridge_lambda * np.eye(H.shape[1])
    return np.linalg.inv(A) @ (H.T @ np.asarray(X, dtype=float))


def random_rows(rng, n, dim):
    return rng.uniform(0.0, 2.0, size=(n, dim))


# -- corruption -------------------------------------------------------------------


def test_corrupt_sigma_zero_is_clipped_identity():
    rng = np.random.default_rng(0)
    x = np.array([0.5, -0.25, 2.0])
    out = corrupt(x, 0.0, rng)
    assert np.array_equal(out, [0.5, 0.0, 2.0])
    # No draws consumed: the generator state is untouched.
    assert rng.integers(1 << 30) == np.random.default_rng(0).integers(1 << 30)


def test_corrupt_output_is_nonnegative():
    rng = np.random.default_rng(1)
    for case in range(100):
        x = rng.uniform(-1, 1, size=5)
        assert np.all(corrupt(x, 0.5, rng) >= 0.0)


def test_corrupt_mean_is_centered_away_from_the_clip():
    # At x = 1 with sigma = 0.1 the clip at zero is a 10-sigma event, so the
    # empirical mean perturbation over many draws stays within +/- 0.01.
    rng = np.random.default_rng(2)
    x = np.ones(1)
    draws = np.array([corrupt(x, 0.1, rng)[0] - 1.0 for _ in range(20_000)])
    assert abs(draws.mean()) < 0.01


def test_corrupt_rejects_non_finite():
    with pytest.raises(ValueError):
        corrupt(np.array([np.inf]), 0.1, np.random.default_rng(0))


def test_noise_rng_is_keyed_by_seed_index_and_salt():
    a = noise_rng(7, 3).normal(size=4)
    assert np.array_equal(a, noise_rng(7, 3).normal(size=4))
    assert not np.array_equal(a, noise_rng(7, 4).normal(size=4))
    assert not np.array_equal(a, noise_rng(8, 3).normal(size=4))
    assert not np.array_equal(a, noise_rng(7, 3, salt=1).normal(size=4))


# -- closed-form oracle ---------------------------------------------------------------


def test_fit_batch_matches_closed_form_oracle():
    rng = np.random.default_rng(11)
    for case in range(10):
        dim = int(rng.integers(2, 5))
        shape = AadrnnShape(dim, (dim,) * int(rng.integers(1, 4)),
                            seed=int(rng.integers(1000)))
        cfg = TrainConfig(noise_sigma=0.1, ridge_lambda=1e-4, seed=int(rng.integers(1000)))
        X = random_rows(rng, int(rng.integers(5, 30)), dim)
        salt = int(rng.integers(1 << 16)) if case % 2 else None
        model = fit_batch(shape, X, cfg, salt)
        expected = oracle_readout(shape, X, cfg, salt)
        assert np.allclose(model.readout, expected, rtol=1e-9, atol=1e-11)


def test_constant_rows_become_a_near_fixed_point():
    # Training on identical rows with no noise and a tiny ridge reproduces the
    # row almost exactly.
    shape = AadrnnShape(3, (3, 3, 3), seed=5)
    x_star = np.array([0.6, 0.3, 0.9])
    X = np.tile(x_star, (50, 1))
    cfg = TrainConfig(noise_sigma=0.0, ridge_lambda=1e-8)
    model = fit_batch(shape, X, cfg)
    assert np.max(np.abs(model.forward(x_star) - x_star)) <= 1e-4


def test_all_zero_window_with_no_noise_yields_zero_readout():
    shape = AadrnnShape.default(3)
    cfg = TrainConfig(noise_sigma=0.0, ridge_lambda=1e-4)
    model = fit_batch(shape, np.zeros((10, 3)), cfg)
    assert np.array_equal(model.readout, np.zeros((3, 3)))


# -- sufficient statistics ---------------------------------------------------------------


def test_batch_equals_incremental_over_random_partitions():
    rng = np.random.default_rng(13)
    shape = AadrnnShape.default(3, seed=2)
    cfg = TrainConfig(noise_sigma=0.1, ridge_lambda=1e-4, seed=3)
    X = random_rows(rng, 200, 3)
    batch_stats, batch_model = fit_batch_with_stats(shape, X, cfg)
    for case in range(20):
        cuts = np.sort(rng.choice(np.arange(1, len(X)), size=int(rng.integers(1, 12)),
                                  replace=False))
        stats = SufficientStats.empty(batch_model.hidden_dim, 3)
        model = AadrnnModel.initial(shape)
        for chunk in np.split(X, cuts):
            stats, model = update_incremental(stats, chunk, model, cfg)
        assert stats.n == batch_stats.n == 200
        assert np.max(np.abs(model.readout - batch_model.readout)) <= 1e-9
        assert np.max(np.abs(stats.G - batch_stats.G)) <= 1e-9
        assert np.max(np.abs(stats.C - batch_stats.C)) <= 1e-9


def test_noise_is_keyed_to_global_row_index_not_window_position():
    # Splitting after row k must corrupt row k+1 identically to the batch fit;
    # a window-local index would break this.
    shape = AadrnnShape.default(2, seed=9)
    cfg = TrainConfig(noise_sigma=0.3, ridge_lambda=1e-4, seed=1)
    X = random_rows(np.random.default_rng(17), 6, 2)
    whole = fit_batch(shape, X, cfg)
    stats = SufficientStats.empty(whole.hidden_dim, 2)
    model = AadrnnModel.initial(shape)
    stats, model = update_incremental(stats, X[:1], model, cfg)
    stats, model = update_incremental(stats, X[1:], model, cfg)
    assert np.max(np.abs(model.readout - whole.readout)) <= 1e-12


def test_accumulation_is_permutation_symmetric():
    # G and C are sums over rows, so folding the same (noisy, clean) pairs in
    # any order gives the same readout.
    rng = np.random.default_rng(19)
    shape = AadrnnShape.default(3, seed=4)
    model = AadrnnModel.initial(shape)
    clean = random_rows(rng, 40, 3)
    noisy = np.maximum(clean + rng.normal(0, 0.1, size=clean.shape), 0)
    stats_fwd = accumulate_pairs(SufficientStats.empty(3, 3), noisy, clean, model)
    perm = rng.permutation(len(clean))
    stats_perm = accumulate_pairs(SufficientStats.empty(3, 3), noisy[perm], clean[perm], model)
    assert np.allclose(stats_fwd.G, stats_perm.G, rtol=1e-12, atol=1e-12)
    assert np.allclose(solve_readout(stats_fwd, 1e-4), solve_readout(stats_perm, 1e-4),
                       rtol=1e-9, atol=1e-12)


def test_gram_matrix_is_symmetric_psd():
    rng = np.random.default_rng(23)
    for case in range(100):
        shape = AadrnnShape.default(3, seed=int(rng.integers(100)))
        model = AadrnnModel.initial(shape)
        stats = SufficientStats.empty(3, 3)
        cfg = TrainConfig(seed=int(rng.integers(100)))
        for _ in range(int(rng.integers(1, 4))):
            stats, model = update_incremental(
                stats, random_rows(rng, int(rng.integers(1, 8)), 3), model, cfg)
        assert np.allclose(stats.G, stats.G.T, rtol=0, atol=1e-12)
        assert np.linalg.eigvalsh(stats.G).min() >= -1e-10


def test_empty_window_is_a_no_op():
    shape = AadrnnShape.default(3)
    model = AadrnnModel.initial(shape)
    stats = SufficientStats.empty(3, 3)
    out_stats, out_model = update_incremental(stats, np.empty((0, 3)), model, TrainConfig())
    assert out_stats is stats and out_model is model


def test_one_row_window_is_reshaped():
    shape = AadrnnShape.default(3)
    model = AadrnnModel.initial(shape)
    stats = SufficientStats.empty(3, 3)
    stats, model = update_incremental(stats, np.array([0.5, 0.25, 1.0]), model, TrainConfig())
    assert stats.n == 1 and model.readout.shape == (3, 3)


# -- validation and failure paths -----------------------------------------------------------


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(noise_sigma=-0.1)
    with pytest.raises(ValueError):
        TrainConfig(ridge_lambda=0.0)
    with pytest.raises(ValueError):
        TrainConfig(window_len=0)
    with pytest.raises(ValueError):
        TrainConfig(window_seconds=0.0)
    TrainConfig(window_len=None, window_seconds=None)  # both off: no online updates


def test_fit_batch_validation():
    shape = AadrnnShape.default(3)
    with pytest.raises(ValueError):
        fit_batch(shape, np.empty((0, 3)), TrainConfig())
    with pytest.raises(DimensionError):
        fit_batch(shape, np.zeros((4, 2)), TrainConfig())
    with pytest.raises(DimensionError):
        update_incremental(SufficientStats.empty(3, 3), np.zeros((2, 4)),
                           AadrnnModel.initial(shape), TrainConfig())


def test_accumulate_pairs_shape_mismatch():
    model = AadrnnModel.initial(AadrnnShape.default(3))
    with pytest.raises(DimensionError):
        accumulate_pairs(SufficientStats.empty(3, 3), np.zeros((2, 3)),
                         np.zeros((3, 3)), model)


def test_solve_readout_validation_and_failure():
    with pytest.raises(ValueError):
        solve_readout(SufficientStats.empty(3, 3), 0.0)
    bad = SufficientStats(np.full((2, 2), np.nan), np.zeros((2, 2)), 1)
    with pytest.raises(TrainingError):
        solve_readout(bad, 1e-4)
