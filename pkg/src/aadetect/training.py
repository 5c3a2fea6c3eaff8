"""Denoising auto-associative training of the readout.

The readout is the ridge solution of hidden activations of *corrupted* benign
rows against the *clean* rows:

    W_out = (H^T H + lambda I)^{-1} H^T X,   H = hidden(max(0, X + noise))

Both offline and online training accumulate the same sufficient statistics
G = sum H^T H and C = sum H^T X, so a batch fit equals any sequence of
windowed incremental updates over the same rows. Noise draws are keyed to the
global accepted-row counter (not to window boundaries), which is what makes
that equivalence exact.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from .aadrnn import AadrnnModel, AadrnnShape
from .metrics import DimensionError


class TrainingError(RuntimeError):
    """The readout system could not be solved."""


@dataclass(frozen=True)
class TrainConfig:
    """Knobs of the denoising regression and the online window policy."""

    noise_sigma: float = 0.1
    ridge_lambda: float = 1e-4
    window_len: Optional[int] = 500
    window_seconds: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.ridge_lambda <= 0:
            raise ValueError("ridge_lambda must be positive")
        if self.window_len is not None and self.window_len < 1:
            raise ValueError("window_len must be >= 1 (or None for no updates)")
        if self.window_seconds is not None and self.window_seconds <= 0:
            raise ValueError("window_seconds must be positive when set")


@dataclass(frozen=True)
class SufficientStats:
    """Accumulated G = sum H^T H, C = sum H^T X, and the accepted-row count."""

    G: np.ndarray
    C: np.ndarray
    n: int = 0

    @classmethod
    def empty(cls, hidden_dim: int, out_dim: int) -> "SufficientStats":
        return cls(np.zeros((hidden_dim, hidden_dim)), np.zeros((hidden_dim, out_dim)), 0)


def noise_rng(seed: int, index: int, salt: Optional[int] = None) -> np.random.Generator:
    """The generator for the ``index``-th accepted row. Independent of how rows
    are grouped into windows; ``salt`` namespaces per-device noise streams."""
    entropy = [seed, index] if salt is None else [seed, salt, index]
    return np.random.default_rng(entropy)


def corrupt(x: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive Gaussian noise clipped at zero: max(0, x + N(0, sigma^2))."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite training row")
    if sigma == 0.0:
        return np.maximum(x, 0.0)
    return np.maximum(x + rng.normal(0.0, sigma, size=x.shape), 0.0)


def _corrupt_window(window: np.ndarray, start_index: int, cfg: TrainConfig,
                    salt: Optional[int]) -> np.ndarray:
    noisy = np.empty_like(window)
    for j in range(window.shape[0]):
        rng = noise_rng(cfg.seed, start_index + j, salt)
        noisy[j] = corrupt(window[j], cfg.noise_sigma, rng)
    return noisy


def accumulate_pairs(stats: SufficientStats, noisy: np.ndarray, clean: np.ndarray,
                     model: AadrnnModel) -> SufficientStats:
    """Fold explicit (noisy, clean) row pairs into the statistics, one row at a
    time in order. Row-wise accumulation performs the same float operations for
    every window partition of the same rows, so incremental training stays
    bit-equal to the one-shot batch fit instead of drifting with gemm blocking."""
    if noisy.shape != clean.shape:
        raise DimensionError(f"noisy shape {noisy.shape} != clean shape {clean.shape}")
    if noisy.ndim == 1:
        noisy = noisy.reshape(1, -1)
        clean = clean.reshape(1, -1)
    G, C = stats.G.copy(), stats.C.copy()
    for j in range(noisy.shape[0]):
        h = model.hidden(noisy[j])
        G += np.outer(h, h)
        C += np.outer(h, clean[j])
    return SufficientStats(G, C, stats.n + noisy.shape[0])


def solve_readout(stats: SufficientStats, ridge_lambda: float) -> np.ndarray:
    """W_out = (G + lambda I)^{-1} C."""
    if ridge_lambda <= 0:
        raise ValueError("ridge_lambda must be positive")
    A = stats.G + ridge_lambda * np.eye(stats.G.shape[0])
    try:
        readout = np.linalg.solve(A, stats.C)
    except np.linalg.LinAlgError as exc:
        raise TrainingError(f"readout system is singular despite ridge: {exc}") from None
    if not np.all(np.isfinite(readout)):
        raise TrainingError("readout solve produced non-finite values")
    readout.flags.writeable = False
    return readout


def update_incremental(stats: SufficientStats, window: np.ndarray, model: AadrnnModel,
                       cfg: TrainConfig, salt: Optional[int] = None
                       ) -> Tuple[SufficientStats, AadrnnModel]:
    """Fold one window of accepted benign rows into the statistics and return
    (updated stats, refreshed model snapshot). The previous snapshot is not
    touched; callers may keep serving it until they swap."""
    window = np.asarray(window, dtype=float)
    if window.ndim == 1:
        window = window.reshape(1, -1)
    if window.shape[1] != model.input_dim:
        raise DimensionError(f"window rows have {window.shape[1]} values, model expects {model.input_dim}")
    if window.shape[0] == 0:
        return stats, model
    noisy = _corrupt_window(window, stats.n, cfg, salt)
    stats = accumulate_pairs(stats, noisy, window, model)
    return stats, model.with_readout(solve_readout(stats, cfg.ridge_lambda))


def fit_batch(shape: AadrnnShape, X: np.ndarray, cfg: TrainConfig,
              salt: Optional[int] = None) -> AadrnnModel:
    """Offline fit over a benign batch: empty statistics plus one window."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_batch needs a non-empty (n, M) matrix of benign rows")
    if X.shape[1] != shape.input_dim:
        raise DimensionError(f"rows have {X.shape[1]} values, shape expects {shape.input_dim}")
    base = AadrnnModel.initial(shape)
    stats = SufficientStats.empty(base.hidden_dim, base.input_dim)
    _, model = update_incremental(stats, X, base, cfg, salt)
    return model


def fit_batch_with_stats(shape: AadrnnShape, X: np.ndarray, cfg: TrainConfig,
                         salt: Optional[int] = None) -> Tuple[SufficientStats, AadrnnModel]:
    """Like ``fit_batch`` but also returns the statistics so online training
    can keep accumulating on top of the initial fit."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_batch needs a non-empty (n, M) matrix of benign rows")
    base = AadrnnModel.initial(shape)
    stats = SufficientStats.empty(base.hidden_dim, base.input_dim)
    return update_incremental(stats, X, base, cfg, salt)
