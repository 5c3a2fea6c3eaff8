"""Run configuration: one JSON file, five sections, strict keys.

Defaults apply for absent keys; unknown sections or keys are rejected.
``--set section.key=value`` overrides parse values as JSON where possible
(so ``true``, ``3``, ``0.5``, ``null`` and ``[0.2,0.3,0.5]`` all work) and
fall back to plain strings.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from .metrics import MetricConfig
from .training import TrainConfig


@dataclass
class MetricsSection:
    N: int = 10
    T_seconds: float = 10.0
    gamma: Optional[List[float]] = None


@dataclass
class TrainSection:
    noise_sigma: float = 0.1
    ridge_lambda: float = 1e-4
    window_len: Optional[int] = 500
    window_seconds: Optional[float] = None
    seed: int = 0
    init_len: int = 1000
    init_seconds: Optional[float] = None


@dataclass
class ThresholdSection:
    mode: str = "whisker"  # "whisker" or "fixed"
    value: Optional[float] = None
    freeze_after_init: bool = False


@dataclass
class DeviceSection:
    alpha: float = 0.1
    level_threshold: float = 0.5
    hysteresis_k: int = 3
    ttl_seconds: float = 3600.0
    init_len: int = 200
    window_len: Optional[int] = None
    window_seconds: Optional[float] = 30.0
    threshold_scale: float = 8.0


@dataclass
class IoSection:
    decision_log: Optional[str] = None
    alerts: Optional[str] = None
    reports_dir: Optional[str] = None


_SECTIONS = {
    "metrics": MetricsSection,
    "train": TrainSection,
    "threshold": ThresholdSection,
    "device": DeviceSection,
    "io": IoSection,
}


@dataclass
class Config:
    metrics: MetricsSection = field(default_factory=MetricsSection)
    train: TrainSection = field(default_factory=TrainSection)
    threshold: ThresholdSection = field(default_factory=ThresholdSection)
    device: DeviceSection = field(default_factory=DeviceSection)
    io: IoSection = field(default_factory=IoSection)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.threshold.mode not in ("whisker", "fixed"):
            raise ValueError(f"threshold.mode must be 'whisker' or 'fixed', got {self.threshold.mode!r}")
        if self.threshold.mode == "fixed" and self.threshold.value is None:
            raise ValueError("threshold.mode 'fixed' requires threshold.value")
        if self.threshold.value is not None and self.threshold.value <= 0:
            raise ValueError("threshold.value must be positive")
        if self.train.init_len < 4:
            raise ValueError("train.init_len must be >= 4")
        if self.device.init_len < 4:
            raise ValueError("device.init_len must be >= 4")
        if not (0.0 < self.device.alpha <= 1.0):
            raise ValueError("device.alpha must be in (0, 1]")
        if not (0.0 < self.device.level_threshold < 1.0):
            raise ValueError("device.level_threshold must be in (0, 1)")
        if self.device.hysteresis_k < 1:
            raise ValueError("device.hysteresis_k must be >= 1")
        if self.device.ttl_seconds <= 0:
            raise ValueError("device.ttl_seconds must be positive")
        if self.device.threshold_scale <= 0:
            raise ValueError("device.threshold_scale must be positive")
        if self.device.window_len is not None and self.device.window_len < 1:
            raise ValueError("device.window_len must be >= 1")
        if self.device.window_seconds is not None and self.device.window_seconds <= 0:
            raise ValueError("device.window_seconds must be positive")
        # Delegated validation: these constructors reject bad values.
        self.metric_config()
        self.train_config()

    def metric_config(self) -> MetricConfig:
        return MetricConfig.from_seconds(self.metrics.N, self.metrics.T_seconds,
                                         self.metrics.gamma)

    def train_config(self) -> TrainConfig:
        return TrainConfig(noise_sigma=self.train.noise_sigma,
                           ridge_lambda=self.train.ridge_lambda,
                           window_len=self.train.window_len,
                           window_seconds=self.train.window_seconds,
                           seed=self.train.seed)

    def device_train_config(self) -> TrainConfig:
        return dataclasses.replace(self.train_config(),
                                   window_len=self.device.window_len,
                                   window_seconds=self.device.window_seconds)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: dataclasses.asdict(getattr(self, name)) for name in _SECTIONS}

    def copy(self) -> "Config":
        return config_from_dict(self.to_dict())


def config_from_dict(doc: Dict[str, Any]) -> Config:
    """Build a Config from nested dicts, rejecting unknown sections and keys."""
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(doc) - set(_SECTIONS)
    if unknown:
        raise ValueError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, cls in _SECTIONS.items():
        body = doc.get(name, {})
        if not isinstance(body, dict):
            raise ValueError(f"config section {name!r} must be an object")
        allowed = {f.name for f in fields(cls)}
        bad = set(body) - allowed
        if bad:
            raise ValueError(f"unknown key(s) in section {name!r}: {', '.join(sorted(bad))}")
        kwargs[name] = cls(**body)
    return Config(**kwargs)


def load_config(path: Union[str, Path, None]) -> Config:
    """Load a config JSON file; None means all defaults."""
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from None
    return config_from_dict(doc)


def _coerce(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: Config, overrides: Sequence[str]) -> Config:
    """Apply ``section.key=value`` overrides on top of a config."""
    doc = config.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        key, value = item.split("=", 1)
        if key.count(".") != 1:
            raise ValueError(f"override key must be section.key, got {key!r}")
        section, name = key.split(".")
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section: {section!r}")
        allowed = {f.name for f in fields(_SECTIONS[section])}
        if name not in allowed:
            raise ValueError(f"unknown key {name!r} in section {section!r}")
        doc[section][name] = _coerce(value)
    return config_from_dict(doc)
