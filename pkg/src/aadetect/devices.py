"""Per-device compromise monitoring.

Every address seen on the link gets its own 6-metric detector (transmitted
and received substreams). Each time a device is involved in a packet its
detector judges the device's current directional vector, and the device's
infection level moves by an exponential moving average of the decision value
relative to the device's threshold:

    level' = (1 - alpha) * level + alpha * min(d / theta_dev, 1)

A device is flagged compromised once its level has exceeded the configured
level threshold at ``hysteresis_k`` consecutive decisions (single-packet
flips are suppressed). Devices idle longer than the TTL are evicted; their
final state is kept for the report.

Per-device retraining is paced by stream time (``device.window_seconds``),
not by accepted-row count, and device init is always count-based. Counting
accepted rows would tie the adaptation cadence to the device's own traffic
rate — a flooding device would then complete windows hundreds of times
faster and drag its threshold up over its own attack. With time pacing a
device whose traffic is being rejected by the benign gate simply stops
learning until it looks benign again.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import Config
from .detector import Decision, Detector, Mode, salt_for_address
from .metrics import DirectionalMetrics
from .traffic import PacketRecord

DEVICE_DIM = 6
_EVICTION_CHECK_EVERY = 512


def infection_level(prev: float, d: float, alpha: float, threshold: float) -> float:
    """One EMA step of the infection level; saturates at d == threshold."""
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if threshold <= 0:
        raise ValueError(f"device threshold must be positive, got {threshold}")
    ratio = min(max(d, 0.0) / threshold, 1.0)
    return (1.0 - alpha) * prev + alpha * ratio


@dataclass
class DeviceRecord:
    """Mutable per-address monitoring state."""

    addr: str
    detector: Detector
    infection_level: float = 0.0
    peak_level: float = 0.0
    last_seen_us: int = 0
    decisions_count: int = 0
    consecutive_above: int = 0


@dataclass(frozen=True)
class DeviceReportRow:
    addr: str
    infection_level: float
    peak_level: float
    is_compromised: bool
    decisions_count: int
    last_seen_us: int
    evicted: bool = False

    def to_dict(self) -> dict:
        return {"addr": self.addr, "infection_level": self.infection_level,
                "peak_level": self.peak_level, "is_compromised": self.is_compromised,
                "decisions_count": self.decisions_count, "last_seen_us": self.last_seen_us,
                "evicted": self.evicted}


@dataclass(frozen=True)
class InfectionReport:
    """Per-device rows (infection level descending) plus a trace-level summary."""

    devices: Tuple[DeviceReportRow, ...]
    packets: int
    compromised: Tuple[str, ...]

    def to_dict(self) -> dict:
        return {"devices": [row.to_dict() for row in self.devices],
                "summary": {"packets": self.packets,
                            "devices": len(self.devices),
                            "compromised": list(self.compromised)}}


class DeviceBank:
    """The set of per-address detectors over one packet stream."""

    def __init__(self, config: Config, strict: bool = True):
        self.config = config
        self._strict = strict
        self._metrics = DirectionalMetrics(config.metric_config(), strict)
        self._devices: Dict[str, DeviceRecord] = {}
        self._evicted: List[DeviceReportRow] = []
        self._packets = 0
        self._ttl_us = int(round(config.device.ttl_seconds * 1e6))

    def __len__(self) -> int:
        return len(self._devices)

    def __contains__(self, addr: str) -> bool:
        return addr in self._devices

    def device(self, addr: str) -> Optional[DeviceRecord]:
        return self._devices.get(addr)

    def _new_device(self, addr: str) -> DeviceRecord:
        dev = self.config.device
        det = Detector(DEVICE_DIM, self.config, mode=Mode.DEVICE, online=True,
                       threshold_scale=dev.threshold_scale,
                       init_len=dev.init_len, init_seconds=None,
                       window_len=dev.window_len, window_seconds=dev.window_seconds,
                       noise_salt=salt_for_address(addr), strict=self._strict)
        return DeviceRecord(addr=addr, detector=det)

    def ingest(self, pkt: PacketRecord) -> List[Tuple[str, Decision]]:
        """Feed one packet; returns the (address, Decision) pairs it produced.

        The packet's src and dst each get a DeviceRecord on first sight; a
        device only starts producing decisions once its own init completes.
        """
        vectors = self._metrics.update(pkt)
        out: List[Tuple[str, Decision]] = []
        for addr, raw in vectors.items():
            rec = self._devices.get(addr)
            if rec is None:
                rec = self._devices[addr] = self._new_device(addr)
            rec.last_seen_us = pkt.timestamp_us
            decision = rec.detector.observe(raw, pkt.timestamp_us)
            if decision is None:
                continue
            rec.decisions_count += 1
            rec.infection_level = infection_level(rec.infection_level, decision.value,
                                                  self.config.device.alpha,
                                                  rec.detector.threshold)
            rec.peak_level = max(rec.peak_level, rec.infection_level)
            if rec.infection_level > self.config.device.level_threshold:
                rec.consecutive_above += 1
            else:
                rec.consecutive_above = 0
            out.append((addr, decision))
        self._packets += 1
        if self._packets % _EVICTION_CHECK_EVERY == 0:
            self._evict_idle(pkt.timestamp_us)
        return out

    def is_compromised(self, rec: DeviceRecord) -> bool:
        return rec.consecutive_above >= self.config.device.hysteresis_k

    def _evict_idle(self, now_us: int) -> None:
        idle = [addr for addr, rec in self._devices.items()
                if now_us - rec.last_seen_us >= self._ttl_us]
        for addr in idle:
            rec = self._devices.pop(addr)
            self._metrics.drop(addr)
            self._evicted.append(self._row(rec, evicted=True))

    def _row(self, rec: DeviceRecord, evicted: bool = False) -> DeviceReportRow:
        return DeviceReportRow(addr=rec.addr,
                               infection_level=rec.infection_level,
                               peak_level=rec.peak_level,
                               is_compromised=self.is_compromised(rec),
                               decisions_count=rec.decisions_count,
                               last_seen_us=rec.last_seen_us,
                               evicted=evicted)

    def report(self) -> InfectionReport:
        """A snapshot of every device (evicted ones included). Pure: calling
        it twice in a row yields identical reports."""
        rows = [self._row(rec) for rec in self._devices.values()]
        rows.extend(self._evicted)
        rows.sort(key=lambda r: (-r.infection_level, r.addr))
        compromised = tuple(r.addr for r in rows if r.is_compromised)
        return InfectionReport(devices=tuple(rows), packets=self._packets,
                               compromised=compromised)
