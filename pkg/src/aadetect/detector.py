"""Anomaly decisions and the detector lifecycle.

A decision compares the weighted absolute reconstruction gap

    d = sum_i gamma_i * |x_i - x_hat_i|

against a threshold; traffic is flagged as attack iff d exceeds it strictly.
The threshold is either a fixed configured value or the Tukey upper whisker
(Q3 + 1.5 * IQR) of decision values observed on benign data.

Lifecycle: a detector starts in ``init`` and only buffers raw vectors. Once
the init window completes it fits the scaler, fits the first model, sets the
threshold, and moves to ``online`` or ``frozen``. Online operation is
semi-supervised: every decision is emitted, but only rows the detector itself
judged benign are queued for training; at each full window the readout is
refit incrementally and (unless frozen by config) the whisker threshold is
re-estimated from that window's decision values. Threshold updates never
apply retroactively — each decision records the threshold in force when it
was made.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, List, Optional, Sequence, Union

import numpy as np

from .aadrnn import (ActivationParams, AadrnnModel, AadrnnShape, model_from_json,
                     model_to_json)
from .config import Config
from .metrics import (DimensionError, MetricVector, MinMaxScaler, ScalingFactors,
                      StreamMetrics, fit_scaling, min_max_fit, scaler_from_json)
from .traffic import FeatureRow, PacketRecord
from .training import SufficientStats, fit_batch_with_stats, update_incremental

STATE_VERSION = 1

_UNSET = object()  # distinguishes "use the config value" from an explicit None


class Mode(str, Enum):
    BOTNET = "botnet"      # single aggregate packet stream, 3 metrics
    FEATURES = "features"  # pre-extracted feature rows, min-max normalized
    DEVICE = "device"      # one per-address stream, 6 directional metrics


class Phase(str, Enum):
    INIT = "init"
    ONLINE = "online"
    FROZEN = "frozen"


class LifecycleError(RuntimeError):
    """An operation that is invalid for the detector's current phase."""


@dataclass(frozen=True)
class Decision:
    """One per-packet (or per-row) verdict."""

    value: float
    is_attack: bool
    at_us: int
    mode: str
    threshold: float


def decision_value(x: np.ndarray, x_hat: np.ndarray, gamma: np.ndarray) -> float:
    """Weighted L1 gap between a vector and its reconstruction.

    Zero weights are allowed here (they ignore a coordinate); configured
    weights are validated as strictly positive where they are resolved.
    """
    x = np.asarray(x, dtype=float)
    x_hat = np.asarray(x_hat, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    if x.shape != x_hat.shape or x.shape != gamma.shape:
        raise DimensionError(
            f"mismatched shapes: x {x.shape}, x_hat {x_hat.shape}, gamma {gamma.shape}")
    if np.any(gamma < 0) or abs(float(gamma.sum()) - 1.0) > 1e-9:
        raise ValueError("gamma weights must be nonnegative and sum to 1")
    return float(np.abs(x - x_hat) @ gamma)


def classify(d: float, threshold: float) -> bool:
    """Attack iff the decision value strictly exceeds the threshold."""
    if not np.isfinite(threshold) or threshold <= 0:
        raise ValueError(f"invalid threshold: {threshold!r}")
    return d > threshold


def whisker_threshold(train_values: Sequence[float]) -> float:
    """Tukey upper whisker Q3 + 1.5 * IQR of benign decision values.

    Quartiles use linear interpolation at positions q * (n - 1). A
    non-positive whisker falls back to the sample maximum, then to 1e-6.
    """
    vals = np.asarray(train_values, dtype=float)
    if vals.ndim != 1 or vals.size < 4:
        raise ValueError(f"whisker threshold needs >= 4 values, got {vals.size}")
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite decision value")
    q1, q3 = np.percentile(vals, [25.0, 75.0])
    whisker = float(q3 + 1.5 * (q3 - q1))
    if whisker <= 0:
        whisker = float(vals.max())
    if whisker <= 0:
        whisker = 1e-6
    return whisker


def simple_threshold_baseline(values: np.ndarray, theta: np.ndarray) -> bool:
    """Metric-wise thresholding: attack iff any value exceeds its theta."""
    values = np.asarray(values, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if values.shape != theta.shape:
        raise DimensionError(f"values shape {values.shape} != theta shape {theta.shape}")
    return bool(np.any(values > theta))


def _weighted_errors(X: np.ndarray, X_hat: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    return np.abs(X - X_hat) @ gamma


class Detector:
    """One anomaly detector over a fixed-dimension metric stream.

    ``mode`` selects the front end: BOTNET detectors consume packets via
    ``step`` and extract metrics in-stream; FEATURES detectors consume feature
    rows (min-max scaling); DEVICE detectors are fed 6-value vectors by the
    device bank via ``observe``.
    """

    def __init__(self, dim: int, config: Config, mode: Union[Mode, str] = Mode.BOTNET, *,
                 online: Optional[bool] = None, shape: Optional[AadrnnShape] = None,
                 threshold_scale: float = 1.0, init_len: Optional[int] = None,
                 init_seconds: Any = _UNSET, window_len: Any = _UNSET,
                 window_seconds: Any = _UNSET, noise_salt: Optional[int] = None,
                 strict: bool = True):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.config = config
        self.mode = Mode(mode)
        self.phase = Phase.INIT
        self._metric_cfg = config.metric_config()
        self._train_cfg = config.train_config()
        self.gamma = self._metric_cfg.resolve_gamma(dim)
        if threshold_scale <= 0:
            raise ValueError("threshold_scale must be positive")
        self._threshold_scale = threshold_scale
        self._init_len = config.train.init_len if init_len is None else init_len
        if self._init_len < 4:
            raise ValueError("init_len must be >= 4")
        self._init_seconds = (config.train.init_seconds if init_seconds is _UNSET
                              else init_seconds)
        self._window_len = (self._train_cfg.window_len if window_len is _UNSET
                            else window_len)
        self._window_seconds = (self._train_cfg.window_seconds if window_seconds is _UNSET
                                else window_seconds)
        self._noise_salt = noise_salt
        self._shape = shape or AadrnnShape.default(dim, seed=self._train_cfg.seed)
        if self._shape.input_dim != dim:
            raise DimensionError(f"shape input_dim {self._shape.input_dim} != dim {dim}")
        if online is None:
            online = self.mode != Mode.FEATURES
        self._online_after_init = online

        self._extractor = (StreamMetrics(self._metric_cfg, strict)
                           if self.mode == Mode.BOTNET else None)
        self._row_counter = 0
        self._init_rows: List[np.ndarray] = []
        self._init_first_us: Optional[int] = None

        self.scaler = None
        self.model: Optional[AadrnnModel] = None
        self.stats: Optional[SufficientStats] = None
        self.threshold: Optional[float] = None
        self.init_values: Optional[np.ndarray] = None
        self.init_decision_values: Optional[np.ndarray] = None
        self.last_values: Optional[np.ndarray] = None

        self._pending: List[np.ndarray] = []
        self._pending_d: List[float] = []
        self._window_start_us: Optional[int] = None

    # -- feeding ------------------------------------------------------------

    def step(self, item: Union[PacketRecord, FeatureRow, np.ndarray]) -> Optional[Decision]:
        """Consume one packet (BOTNET) or one feature row (FEATURES)."""
        if self.mode == Mode.BOTNET:
            if not isinstance(item, PacketRecord):
                raise TypeError("botnet-mode detectors consume PacketRecord items")
            raw = self._extractor.update(item.timestamp_us, item.size_bytes)
            return self.observe(raw, item.timestamp_us)
        if self.mode == Mode.FEATURES:
            feats = item.features if isinstance(item, FeatureRow) else np.asarray(item, dtype=float)
            at_us = self._row_counter
            return self.observe(feats, at_us)
        raise LifecycleError("device-mode detectors are fed by the DeviceBank")

    def observe(self, raw: np.ndarray, at_us: int) -> Optional[Decision]:
        """Consume one raw metric vector. Returns None during init."""
        raw = np.asarray(raw, dtype=float)
        if raw.shape != (self.dim,):
            raise DimensionError(f"raw vector shape {raw.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(raw)):
            raise ValueError("non-finite raw metric value")
        self._row_counter += 1

        if self.phase == Phase.INIT:
            if self._init_first_us is None:
                self._init_first_us = at_us
            time_done = (self._init_seconds is not None
                         and at_us - self._init_first_us >= self._init_seconds * 1e6
                         and len(self._init_rows) >= 4)
            if not time_done:
                self._init_rows.append(raw)
                if self._init_seconds is None and len(self._init_rows) >= self._init_len:
                    self._finish_init()
                return None
            self._finish_init()
            # fall through: this row is the first to be judged

        x = self.scaler.apply(raw)
        x_hat = self.model.forward(x)
        d = float(np.abs(x - x_hat) @ self.gamma)
        is_attack = d > self.threshold
        self.last_values = x
        decision = Decision(value=d, is_attack=is_attack, at_us=at_us,
                            mode=self.mode.value, threshold=self.threshold)
        if self.phase == Phase.ONLINE and not is_attack:
            self._accept(x, d, at_us)
        return decision

    # -- lifecycle ----------------------------------------------------------

    def _finish_init(self) -> None:
        X_raw = np.asarray(self._init_rows, dtype=float)
        if self.mode == Mode.FEATURES:
            self.scaler = min_max_fit(X_raw)
        else:
            self.scaler = fit_scaling(X_raw)
        X = self.scaler.apply(X_raw)
        self.stats, self.model = fit_batch_with_stats(self._shape, X, self._train_cfg,
                                                      salt=self._noise_salt)
        d_init = _weighted_errors(X, self.model.forward(X), self.gamma)
        if self.config.threshold.mode == "fixed":
            self.threshold = float(self.config.threshold.value)
        else:
            self.threshold = whisker_threshold(d_init) * self._threshold_scale
        X.flags.writeable = False
        self.init_values = X
        self.init_decision_values = d_init
        self._init_rows = []
        self.phase = Phase.ONLINE if self._online_after_init else Phase.FROZEN

    def _accept(self, x: np.ndarray, d: float, at_us: int) -> None:
        if self._window_len is None and self._window_seconds is None:
            return  # online but with no update policy: behaves frozen for training
        self._pending.append(x)
        self._pending_d.append(d)
        if self._window_start_us is None:
            self._window_start_us = at_us
        count_done = self._window_len is not None and len(self._pending) >= self._window_len
        time_done = (self._window_seconds is not None
                     and at_us - self._window_start_us >= self._window_seconds * 1e6)
        if count_done or time_done:
            self._finish_window()

    def _finish_window(self) -> None:
        window = np.asarray(self._pending, dtype=float)
        self.stats, self.model = update_incremental(self.stats, window, self.model,
                                                    self._train_cfg, salt=self._noise_salt)
        if (self.config.threshold.mode == "whisker"
                and not self.config.threshold.freeze_after_init
                and len(self._pending_d) >= 4):
            self.threshold = whisker_threshold(self._pending_d) * self._threshold_scale
        self._pending = []
        self._pending_d = []
        self._window_start_us = None

    def freeze(self) -> None:
        """Stop learning; keep deciding with the current snapshot."""
        if self.phase == Phase.INIT:
            raise LifecycleError("cannot freeze a detector that has not finished init")
        self.phase = Phase.FROZEN

    @property
    def accepted_rows(self) -> int:
        """Rows folded into training so far (init rows plus accepted windows)."""
        return 0 if self.stats is None else self.stats.n

    @property
    def pending_rows(self) -> int:
        return len(self._pending)


# ---------------------------------------------------------------------------
# Persistence


def save_state(detector: Detector, path: Union[str, Path]) -> None:
    """Persist a detector's model, scaler, threshold, and training statistics.

    The file is deterministic for a deterministic run (sorted keys, exact
    float round-trip via repr).
    """
    if detector.phase == Phase.INIT:
        raise LifecycleError("cannot save a detector that has not finished init")
    doc = {"version": STATE_VERSION}
    doc.update(model_to_json(detector.model))
    doc["scaling_factors"] = detector.scaler.to_json()
    doc["threshold"] = float(detector.threshold)
    doc["mode"] = detector.mode.value
    doc["gamma"] = [float(g) for g in detector.gamma]
    doc["stats"] = {"G": detector.stats.G.tolist(), "C": detector.stats.C.tolist(),
                    "n": detector.stats.n}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_state(path: Union[str, Path], config: Optional[Config] = None, *,
               online: bool = False, strict: bool = True) -> Detector:
    """Rebuild a detector from a state file; it decides immediately, with no
    re-training (phase ``frozen``, or ``online`` to continue learning)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = int(doc.get("version", -1))
    if version < 1 or version > STATE_VERSION:
        raise ValueError(f"state file version {version} not supported (max {STATE_VERSION})")
    config = config or Config()
    model = model_from_json(doc)
    detector = Detector(model.input_dim, config, mode=doc["mode"], online=online,
                        shape=model.shape(), strict=strict)
    detector.model = model
    detector.scaler = scaler_from_json(doc["scaling_factors"])
    detector.threshold = float(doc["threshold"])
    if doc["threshold"] <= 0 or not np.isfinite(detector.threshold):
        raise ValueError(f"state file threshold must be positive, got {doc['threshold']!r}")
    if "gamma" in doc:
        gamma = np.asarray(doc["gamma"], dtype=float)
        if gamma.shape != (model.input_dim,):
            raise DimensionError("state gamma length does not match model dimension")
        detector.gamma = gamma
    stats = doc.get("stats")
    if stats is not None:
        detector.stats = SufficientStats(np.asarray(stats["G"], dtype=float),
                                         np.asarray(stats["C"], dtype=float),
                                         int(stats["n"]))
    else:
        detector.stats = SufficientStats.empty(model.hidden_dim, model.input_dim)
    detector.phase = Phase.ONLINE if online else Phase.FROZEN
    return detector


def salt_for_address(addr: str) -> int:
    """A stable per-address namespace for training noise streams."""
    return zlib.crc32(addr.encode("utf-8"))
