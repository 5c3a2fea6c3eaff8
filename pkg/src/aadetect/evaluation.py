"""Scoring, replay drivers, and report emission.

Rates follow the usual confusion-matrix definitions, reported as percentages:
accuracy, TPR (recall on attacks), FNR, TNR, FPR. Per-attack-type accuracy is
the fraction of that type's rows classified correctly. Rates whose
denominator is zero are reported as None.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Config
from .detector import Decision, Detector, Mode, Phase
from .devices import InfectionReport
from .traffic import FeatureRow, Trace

DECISION_LOG_FIELDS = ("timestamp_us", "decision_value", "threshold", "is_attack", "mode")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fn: int
    tn: int
    fp: int

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fn": self.fn, "tn": self.tn, "fp": self.fp}


def _pct(num: int, den: int) -> Optional[float]:
    return None if den == 0 else 100.0 * num / den


@dataclass
class EvalReport:
    counts: ConfusionCounts
    accuracy: float
    tpr: Optional[float]
    fnr: Optional[float]
    tnr: Optional[float]
    fpr: Optional[float]
    per_attack_type: Dict[str, float]
    decision_series: List[Tuple[int, float, float]]
    config: Optional[dict] = None

    def to_dict(self, include_series: bool = True) -> dict:
        doc = {
            "counts": self.counts.to_dict(),
            "rates": {"accuracy": self.accuracy, "tpr": self.tpr, "fnr": self.fnr,
                      "tnr": self.tnr, "fpr": self.fpr},
            "per_attack_type": dict(self.per_attack_type),
        }
        if include_series:
            doc["decision_series"] = [[ts, v, thr] for ts, v, thr in self.decision_series]
        if self.config is not None:
            doc["config"] = self.config
        return doc

    def summary(self) -> str:
        def fmt(v):
            return "n/a" if v is None else f"{v:.2f}"
        c = self.counts
        return (f"accuracy {fmt(self.accuracy)}  tpr {fmt(self.tpr)}  fnr {fmt(self.fnr)}  "
                f"tnr {fmt(self.tnr)}  fpr {fmt(self.fpr)}  "
                f"(tp {c.tp} fn {c.fn} tn {c.tn} fp {c.fp})")


def score(decisions: Sequence[Decision], labels: Sequence[Optional[bool]],
          attack_types: Optional[Sequence[Optional[str]]] = None,
          config: Optional[Config] = None) -> EvalReport:
    """Score decisions against ground truth.

    Every decision must have a label; offending row indices are listed
    otherwise. ``attack_types`` (parallel to the rows) feeds the per-type
    accuracy map; rows without a type only contribute to the aggregate.
    """
    if len(decisions) != len(labels):
        raise ValueError(f"{len(decisions)} decisions but {len(labels)} labels")
    if len(decisions) == 0:
        raise ValueError("nothing to score: empty decision sequence")
    missing = [i for i, lab in enumerate(labels) if lab is None]
    if missing:
        shown = ", ".join(str(i) for i in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise ValueError(f"rows without ground-truth labels: {shown}{more}")
    if attack_types is not None and len(attack_types) != len(decisions):
        raise ValueError("attack_types length does not match decisions")

    tp = fn = tn = fp = 0
    type_total: Dict[str, int] = {}
    type_correct: Dict[str, int] = {}
    for i, (dec, label) in enumerate(zip(decisions, labels)):
        correct = dec.is_attack == label
        if label:
            tp += dec.is_attack
            fn += not dec.is_attack
        else:
            tn += not dec.is_attack
            fp += dec.is_attack
        if attack_types is not None:
            at = attack_types[i]
            if at:
                type_total[at] = type_total.get(at, 0) + 1
                type_correct[at] = type_correct.get(at, 0) + int(correct)

    counts = ConfusionCounts(tp=tp, fn=fn, tn=tn, fp=fp)
    per_type = {name: 100.0 * type_correct[name] / type_total[name]
                for name in sorted(type_total)}
    return EvalReport(
        counts=counts,
        accuracy=_pct(tp + tn, counts.total),
        tpr=_pct(tp, tp + fn), fnr=_pct(fn, tp + fn),
        tnr=_pct(tn, tn + fp), fpr=_pct(fp, tn + fp),
        per_attack_type=per_type,
        decision_series=[(d.at_us, d.value, d.threshold) for d in decisions],
        config=config.to_dict() if config is not None else None,
    )


# ---------------------------------------------------------------------------
# Replay drivers


@dataclass
class RunResult:
    """Decisions plus the ground truth for the rows that produced them."""

    decisions: List[Decision]
    labels: List[Optional[bool]]
    attack_types: List[Optional[str]]
    detector: Detector
    skipped: int  # rows consumed by init
    values: Optional[np.ndarray] = None  # normalized vectors per decision

    def report(self, config: Optional[Config] = None) -> EvalReport:
        return score(self.decisions, self.labels, self.attack_types, config)


def run_stream(trace: Trace, config: Config, *, online: bool = True,
               detector: Optional[Detector] = None, collect_values: bool = False) -> RunResult:
    """Replay a packet trace through a single-stream detector."""
    det = detector or Detector(3, config, mode=Mode.BOTNET, online=online)
    decisions: List[Decision] = []
    labels: List[Optional[bool]] = []
    attack_types: List[Optional[str]] = []
    values: List[np.ndarray] = []
    skipped = 0
    for pkt in trace:
        decision = det.step(pkt)
        if decision is None:
            skipped += 1
            continue
        decisions.append(decision)
        labels.append(pkt.label)
        attack_types.append(pkt.attack_type)
        if collect_values:
            values.append(det.last_values)
    return RunResult(decisions, labels, attack_types, det, skipped,
                     np.asarray(values) if collect_values else None)


def run_features(rows: Sequence[FeatureRow], config: Config, *, online: bool = False,
                 detector: Optional[Detector] = None,
                 init_len: Optional[int] = None) -> RunResult:
    """Replay feature rows through a feature-mode detector."""
    if not rows:
        raise ValueError("no feature rows to replay")
    dim = len(rows[0].features)
    det = detector or Detector(dim, config, mode=Mode.FEATURES, online=online,
                               init_len=init_len)
    decisions: List[Decision] = []
    labels: List[Optional[bool]] = []
    attack_types: List[Optional[str]] = []
    skipped = 0
    for row in rows:
        decision = det.step(row)
        if decision is None:
            skipped += 1
            continue
        decisions.append(decision)
        labels.append(row.label)
        attack_types.append(row.attack_type)
    return RunResult(decisions, labels, attack_types, det, skipped)


def check_benign_prefix(trace: Trace, init_len: int) -> None:
    """The first ``init_len`` packets must be labeled benign."""
    if len(trace) < init_len:
        raise ValueError(f"trace has {len(trace)} packets, init needs {init_len}")
    for i in range(init_len):
        if trace[i].label is not False:
            raise ValueError(
                f"benign prefix shorter than init_len: packet {i} is not labeled benign")


@dataclass
class CompareResult:
    offline: EvalReport
    online: EvalReport

    def to_dict(self) -> dict:
        return {"offline": self.offline.to_dict(include_series=False),
                "online": self.online.to_dict(include_series=False),
                "offline_series": [[t, v, thr] for t, v, thr in self.offline.decision_series],
                "online_series": [[t, v, thr] for t, v, thr in self.online.decision_series]}


def compare_online_offline(trace: Trace, config: Config) -> CompareResult:
    """Run the same labeled trace twice — init then frozen, versus init then
    windowed incremental updates — and score both runs."""
    check_benign_prefix(trace, config.train.init_len)
    offline = run_stream(trace, config, online=False)
    online = run_stream(trace, config, online=True)
    return CompareResult(offline=offline.report(config), online=online.report(config))


# ---------------------------------------------------------------------------
# Decision logs and plot data


def write_decision_log(decisions: Sequence[Decision], path: Union[str, Path]) -> None:
    path = Path(path)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(DECISION_LOG_FIELDS)
        for d in decisions:
            writer.writerow([d.at_us, repr(d.value), repr(d.threshold),
                             int(d.is_attack), d.mode])


def read_decision_log(path: Union[str, Path]) -> List[Decision]:
    path = Path(path)
    decisions: List[Decision] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != DECISION_LOG_FIELDS:
            raise ValueError(f"{path}: expected header {','.join(DECISION_LOG_FIELDS)}")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(DECISION_LOG_FIELDS):
                raise ValueError(f"{path}:{line_no}: expected {len(DECISION_LOG_FIELDS)} columns")
            decisions.append(Decision(at_us=int(row[0]), value=float(row[1]),
                                      threshold=float(row[2]), is_attack=bool(int(row[3])),
                                      mode=row[4]))
    return decisions


def align_with_trace(decisions: Sequence[Decision], trace: Trace
                     ) -> Tuple[List[Optional[bool]], List[Optional[str]]]:
    """Pair logged decisions with trace ground truth.

    Decisions correspond to the trailing packets of the trace (the leading
    ones fed init). Timestamps must match row for row; the first mismatch is
    reported.
    """
    offset = len(trace) - len(decisions)
    if offset < 0:
        raise ValueError(f"{len(decisions)} decisions but only {len(trace)} trace rows")
    for i, dec in enumerate(decisions):
        rec = trace[offset + i]
        if dec.at_us != rec.timestamp_us:
            raise ValueError(
                f"log/trace misalignment at decision row {i}: "
                f"decision timestamp {dec.at_us} != trace timestamp {rec.timestamp_us}")
    labels = [trace[offset + i].label for i in range(len(decisions))]
    types = [trace[offset + i].attack_type for i in range(len(decisions))]
    return labels, types


def emit_plot_data(report: Union[EvalReport, InfectionReport],
                   out_dir: Union[str, Path]) -> List[Path]:
    """Write plottable CSV series for a report; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: List[Path] = []
    if isinstance(report, InfectionReport):
        path = out_dir / "infection_levels.csv"
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["addr", "infection_level", "peak_level", "is_compromised",
                             "decisions_count"])
            for row in report.devices:
                writer.writerow([row.addr, repr(row.infection_level), repr(row.peak_level),
                                 int(row.is_compromised), row.decisions_count])
        written.append(path)
        return written

    path = out_dir / "decision_series.csv"
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["timestamp_us", "decision_value", "threshold"])
        for ts, value, thr in report.decision_series:
            writer.writerow([ts, repr(value), repr(thr)])
    written.append(path)

    path = out_dir / "per_type_accuracy.csv"
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["attack_type", "accuracy_pct"])
        for name, acc in report.per_attack_type.items():
            writer.writerow([name, repr(acc)])
    written.append(path)
    return written
