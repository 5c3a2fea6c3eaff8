"""Sliding-window traffic metrics and normalization.

Each packet is summarized by three values computed over the stream it belongs
to:

  m1  total bytes over the most recent ``min(n, N)`` packets (the new packet
      included)
  m2  average inter-transmission time over those same packets, in seconds:
      the timestamp span divided by ``count - 1`` (zero until two packets
      have been seen)
  m3  number of packets whose timestamp falls in the half-open window
      ``(t - T, t]`` ending at the new packet

The per-address extension keeps two independent substreams per address
(packets it sent, packets it received) and concatenates their metric triples
into a 6-value vector, so a device's metric stream depends only on packets
that involve the device.

Normalization for the streaming modes divides by per-metric scale factors
fitted as the component-wise maximum over an initialization window. Feature
mode uses min-max normalization instead. Neither clamps out-of-range values:
post-init traffic may legitimately exceed the observed range.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from .traffic import PacketRecord, TimestampOrderError


class DimensionError(ValueError):
    """A vector's dimension does not match what the operation expects."""


def _as_matrix(rows: Iterable[np.ndarray]) -> np.ndarray:
    mat = np.asarray(list(rows) if not isinstance(rows, np.ndarray) else rows, dtype=float)
    if mat.ndim == 1:
        mat = mat.reshape(1, -1)
    return mat


@dataclass(frozen=True)
class MetricConfig:
    """Window sizes for metric extraction plus the decision weights that ride
    along with the metric dimension."""

    N: int = 10
    T_us: int = 10_000_000
    gamma: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.N < 2:
            raise ValueError(f"N must be >= 2, got {self.N}")
        if self.T_us <= 0:
            raise ValueError(f"T_us must be positive, got {self.T_us}")
        if self.gamma is not None:
            g = np.asarray(self.gamma, dtype=float)
            if np.any(g <= 0):
                raise ValueError("gamma weights must be positive")
            if abs(float(g.sum()) - 1.0) > 1e-9:
                raise ValueError(f"gamma must sum to 1, got {g.sum()!r}")
            object.__setattr__(self, "gamma", tuple(float(v) for v in g))

    @classmethod
    def from_seconds(cls, N: int = 10, T_seconds: float = 10.0,
                     gamma: Optional[Sequence[float]] = None) -> "MetricConfig":
        return cls(N=N, T_us=int(round(T_seconds * 1e6)),
                   gamma=tuple(gamma) if gamma is not None else None)

    def resolve_gamma(self, dim: int) -> np.ndarray:
        """Weights for a ``dim``-metric decision; uniform when unset."""
        if self.gamma is None:
            return np.full(dim, 1.0 / dim)
        if len(self.gamma) != dim:
            raise DimensionError(f"gamma has {len(self.gamma)} weights, need {dim}")
        return np.asarray(self.gamma, dtype=float)


@dataclass(frozen=True)
class MetricVector:
    """A normalized metric vector paired with its raw values and timestamp."""

    values: np.ndarray
    raw: np.ndarray
    at_us: int


class StreamMetrics:
    """Streaming computation of (m1, m2, m3) for one packet stream.

    State is two buffers: the last ``N`` (timestamp, size) pairs and the
    timestamps inside the trailing ``T`` window. Each update is O(1) amortized.
    """

    def __init__(self, cfg: MetricConfig, strict: bool = True):
        self.cfg = cfg
        self.strict = strict
        self._recent: Deque[Tuple[int, int]] = deque()
        self._recent_bytes = 0
        self._window: Deque[int] = deque()
        self._last_ts: Optional[int] = None

    def update(self, ts_us: int, size_bytes: int) -> np.ndarray:
        """Advance the buffers with one packet and return its metric triple."""
        if self._last_ts is not None and ts_us < self._last_ts:
            if self.strict:
                raise TimestampOrderError(
                    f"timestamp {ts_us} precedes previous {self._last_ts}")
        else:
            self._last_ts = ts_us

        self._recent.append((ts_us, size_bytes))
        self._recent_bytes += size_bytes
        if len(self._recent) > self.cfg.N:
            _, old_size = self._recent.popleft()
            self._recent_bytes -= old_size

        n = len(self._recent)
        m1 = float(self._recent_bytes)
        if n >= 2:
            span_us = ts_us - self._recent[0][0]
            m2 = max(span_us, 0) / (n - 1) / 1e6
        else:
            m2 = 0.0

        self._window.append(ts_us)
        cutoff = ts_us - self.cfg.T_us
        while self._window[0] <= cutoff:
            self._window.popleft()
        m3 = float(len(self._window))

        return np.array([m1, m2, m3])


def extract_raw(state: StreamMetrics, pkt: PacketRecord) -> np.ndarray:
    """Advance a stream's window state with one packet; return its raw triple."""
    return state.update(pkt.timestamp_us, pkt.size_bytes)


class DirectionalMetrics:
    """Per-address transmitted/received substream metrics (6 values each).

    An address's vector is (m1, m2, m3) over packets it sent followed by
    (m1, m2, m3) over packets it received; a substream's triple only moves
    when that substream sees a packet, and is zero before its first one.
    """

    def __init__(self, cfg: MetricConfig, strict: bool = True):
        self.cfg = cfg
        self.strict = strict
        self._tx: Dict[str, StreamMetrics] = {}
        self._rx: Dict[str, StreamMetrics] = {}
        self._tx_last: Dict[str, np.ndarray] = {}
        self._rx_last: Dict[str, np.ndarray] = {}

    def update(self, pkt: PacketRecord) -> Dict[str, np.ndarray]:
        """Advance src's tx substream and dst's rx substream; return the
        updated 6-value vectors keyed by address (one entry if src == dst)."""
        tx = self._tx.get(pkt.src)
        if tx is None:
            tx = self._tx[pkt.src] = StreamMetrics(self.cfg, self.strict)
        self._tx_last[pkt.src] = tx.update(pkt.timestamp_us, pkt.size_bytes)

        rx = self._rx.get(pkt.dst)
        if rx is None:
            rx = self._rx[pkt.dst] = StreamMetrics(self.cfg, self.strict)
        self._rx_last[pkt.dst] = rx.update(pkt.timestamp_us, pkt.size_bytes)

        zeros = np.zeros(3)
        out: Dict[str, np.ndarray] = {}
        for addr in (pkt.src, pkt.dst):
            if addr not in out:
                out[addr] = np.concatenate([self._tx_last.get(addr, zeros),
                                            self._rx_last.get(addr, zeros)])
        return out

    def addresses(self) -> Tuple[str, ...]:
        return tuple(dict.fromkeys(list(self._tx) + list(self._rx)))

    def drop(self, addr: str) -> None:
        """Forget an address's substream state (device eviction)."""
        for store in (self._tx, self._rx, self._tx_last, self._rx_last):
            store.pop(addr, None)


def extract_directional(state: DirectionalMetrics, pkt: PacketRecord) -> Dict[str, np.ndarray]:
    """Advance per-address substreams with one packet; return updated vectors."""
    return state.update(pkt)


# ---------------------------------------------------------------------------
# Scaling


@dataclass(frozen=True)
class ScalingFactors:
    """Per-metric divisors fitted as the component-wise max of an init window
    (zero maxima replaced by 1 so all-quiet metrics pass through unchanged)."""

    scale: np.ndarray

    def apply(self, raw: np.ndarray) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        if raw.shape[-1] != self.scale.shape[0]:
            raise DimensionError(
                f"vector has {raw.shape[-1]} metrics, scaling expects {self.scale.shape[0]}")
        return raw / self.scale

    def to_json(self) -> dict:
        return {"kind": "max", "scale": [float(v) for v in self.scale]}


def fit_scaling(raws: Iterable[np.ndarray]) -> ScalingFactors:
    """Fit max-based scale factors over an initialization window of raw vectors."""
    mat = _as_matrix(raws)
    if mat.size == 0:
        raise ValueError("cannot fit scaling on an empty window")
    if not np.all(np.isfinite(mat)):
        raise ValueError("non-finite raw metric value in scaling window")
    scale = mat.max(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    scale.flags.writeable = False
    return ScalingFactors(scale)


def normalize(raw: np.ndarray, scaling: ScalingFactors, at_us: int = 0) -> MetricVector:
    """Divide raw metrics by their scale factors. Values above 1 are kept:
    out-of-range traffic is exactly what detection must see."""
    raw = np.asarray(raw, dtype=float)
    return MetricVector(values=scaling.apply(raw), raw=raw, at_us=at_us)


@dataclass(frozen=True)
class MinMaxScaler:
    """Feature-mode normalization: (x - min) / (max - min) per column, fitted
    on benign training rows; degenerate columns map to 0. Unclamped."""

    lo: np.ndarray
    hi: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != self.lo.shape[0]:
            raise DimensionError(
                f"vector has {features.shape[-1]} features, scaler expects {self.lo.shape[0]}")
        span = self.hi - self.lo
        safe = np.where(span == 0.0, 1.0, span)
        out = (features - self.lo) / safe
        if features.ndim == 1:
            out[span == 0.0] = 0.0
        else:
            out[:, span == 0.0] = 0.0
        return out

    def to_json(self) -> dict:
        return {"kind": "minmax", "lo": [float(v) for v in self.lo],
                "hi": [float(v) for v in self.hi]}


def min_max_fit(rows: Iterable[np.ndarray]) -> MinMaxScaler:
    """Fit per-column min/max over (benign) training rows."""
    mat = _as_matrix(rows)
    if mat.size == 0:
        raise ValueError("cannot fit min-max on an empty dataset")
    if not np.all(np.isfinite(mat)):
        raise ValueError("non-finite feature value in training rows")
    lo = mat.min(axis=0)
    hi = mat.max(axis=0)
    lo.flags.writeable = False
    hi.flags.writeable = False
    return MinMaxScaler(lo, hi)


def min_max_apply(scaler: MinMaxScaler, features: np.ndarray) -> np.ndarray:
    return scaler.apply(features)


def scaler_from_json(doc: dict):
    """Rebuild either scaler kind from its JSON form."""
    kind = doc.get("kind")
    if kind == "max":
        scale = np.asarray(doc["scale"], dtype=float)
        scale.flags.writeable = False
        return ScalingFactors(scale)
    if kind == "minmax":
        lo = np.asarray(doc["lo"], dtype=float)
        hi = np.asarray(doc["hi"], dtype=float)
        lo.flags.writeable = False
        hi.flags.writeable = False
        return MinMaxScaler(lo, hi)
    raise ValueError(f"unknown scaling kind: {kind!r}")
