"""Command-line interface.

    aadetect init   TRACE --out STATE [--features] [--config C] [--set k=v]
    aadetect replay TRACE [--state STATE | --cold-start] [--online | --frozen]
                    [--devices | --features] [--log CSV] [--alerts PATH|-]
                    [--report JSON] [--plots DIR] [--save-state STATE]
    aadetect eval   --log CSV --trace TRACE [--report JSON] [--plots DIR]
                    [--assert "accuracy>=99,fpr<=1"]
    aadetect synth  --out TRACE --duration S --rate PPS [--seed N] [...]
    aadetect bench  [--seed N]

Exit codes: 0 success, 1 failed assertion or benchmark, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import bench as bench_mod
from .config import Config, apply_overrides, load_config
from .detector import Decision, Detector, LifecycleError, Mode, Phase, load_state, save_state
from .devices import DeviceBank
from .evaluation import (DECISION_LOG_FIELDS, align_with_trace, emit_plot_data,
                         read_decision_log, run_features, score, write_decision_log)
from .metrics import DimensionError
from .traffic import (AttackSegment, TraceParseError, TraceSpec, load_feature_dataset,
                      load_trace, save_trace, synth_trace)

_ASSERT_METRICS = ("accuracy", "tpr", "fnr", "tnr", "fpr")
_ASSERT_OPS = ("<=", ">=", "==", "<", ">")


def _build_config(args) -> Config:
    config = load_config(getattr(args, "config", None))
    overrides = getattr(args, "set", None) or []
    if overrides:
        config = apply_overrides(config, overrides)
    return config


def _open_alerts(spec: Optional[str]):
    if spec is None:
        return None
    if spec == "-":
        return sys.stdout
    return open(spec, "w", encoding="utf-8")


def _emit_alert(fh, decision: Decision, addr: Optional[str] = None) -> None:
    doc = {"timestamp_us": decision.at_us, "decision_value": decision.value,
           "threshold": decision.threshold, "mode": decision.mode}
    if addr is not None:
        doc["addr"] = addr
    fh.write(json.dumps(doc, sort_keys=True) + "\n")
    fh.flush()


class _DecisionLogWriter:
    """Streams decision-log rows, flushing per decision so logs can be tailed."""

    def __init__(self, path: Optional[str]):
        self._fh = open(path, "w", newline="\n", encoding="utf-8") if path else None
        self._writer = None
        if self._fh:
            self._writer = csv.writer(self._fh, lineterminator="\n")
            self._writer.writerow(DECISION_LOG_FIELDS)
            self._fh.flush()

    def write(self, d: Decision) -> None:
        if self._writer is None:
            return
        self._writer.writerow([d.at_us, repr(d.value), repr(d.threshold),
                               int(d.is_attack), d.mode])
        self._fh.flush()

    def close(self) -> None:
        if self._fh:
            self._fh.close()


# -- init ---------------------------------------------------------------------


def cmd_init(args) -> int:
    config = _build_config(args)
    if args.features:
        rows = [r for r in load_feature_dataset(args.trace) if r.label is not True]
        if len(rows) < 4:
            raise ValueError(f"feature training file has only {len(rows)} benign rows, need >= 4")
        det = Detector(len(rows[0].features), config, mode=Mode.FEATURES,
                       online=False, init_len=len(rows))
        for row in rows:
            det.step(row)
    else:
        trace = load_trace(args.trace)
        benign = [p for p in trace if p.label is not True]
        det = Detector(3, config, mode=Mode.BOTNET, online=False)
        for pkt in benign:
            det.step(pkt)
            if det.phase != Phase.INIT:
                break
        if det.phase == Phase.INIT:
            raise ValueError(f"trace has only {len(benign)} usable benign packets, "
                             f"init needs {config.train.init_len}")
    save_state(det, args.out)
    print(f"initialized {det.mode.value} detector: {det.accepted_rows} training rows, "
          f"threshold {det.threshold:.6g} -> {args.out}")
    return 0


# -- replay -------------------------------------------------------------------


def cmd_replay(args) -> int:
    config = _build_config(args)
    if args.devices and args.features:
        raise ValueError("--devices and --features are mutually exclusive")
    if args.state and args.cold_start:
        raise ValueError("--state and --cold-start are mutually exclusive")
    log_path = args.log or config.io.decision_log
    alerts_spec = args.alerts or config.io.alerts

    if args.devices:
        return _replay_devices(args, config, log_path, alerts_spec)
    if args.features:
        return _replay_features(args, config, log_path, alerts_spec)
    return _replay_stream(args, config, log_path, alerts_spec)


def _score_and_report(args, config, decisions, labels, types, extra_print=None) -> None:
    report = None
    if decisions and all(lab is not None for lab in labels):
        report = score(decisions, labels, types, config)
        print(report.summary())
        if report.per_attack_type:
            print("per-attack-type accuracy:")
            for name, acc in report.per_attack_type.items():
                print(f"  {name:24s} {acc:8.2f}")
    else:
        print(f"{len(decisions)} decisions (trace unlabeled; no scoring)")
    if extra_print:
        extra_print()
    if args.report:
        if report is None:
            raise ValueError("--report needs a fully labeled input")
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
    if args.plots:
        if report is None:
            raise ValueError("--plots needs a fully labeled input")
        for path in emit_plot_data(report, args.plots):
            print(f"wrote {path}")


def _replay_stream(args, config, log_path, alerts_spec) -> int:
    trace = load_trace(args.trace)
    if args.state:
        online = bool(args.online)  # loaded detectors stay frozen unless asked
        det = load_state(args.state, config, online=online)
        if det.mode != Mode.BOTNET:
            raise ValueError(f"state file holds a {det.mode.value} detector, expected botnet")
    else:
        online = not args.frozen  # cold start defaults to online learning
        det = Detector(3, config, mode=Mode.BOTNET, online=online)

    log = _DecisionLogWriter(log_path)
    alerts = _open_alerts(alerts_spec)
    decisions: List[Decision] = []
    labels: List[Optional[bool]] = []
    types: List[Optional[str]] = []
    try:
        for pkt in trace:
            decision = det.step(pkt)
            if decision is None:
                continue
            decisions.append(decision)
            labels.append(pkt.label)
            types.append(pkt.attack_type)
            log.write(decision)
            if alerts is not None and decision.is_attack:
                _emit_alert(alerts, decision)
    finally:
        log.close()
        if alerts is not None and alerts is not sys.stdout:
            alerts.close()

    if not decisions:
        raise ValueError("trace ended before init completed; no decisions were made")
    _score_and_report(args, config, decisions, labels, types)
    if args.save_state:
        save_state(det, args.save_state)
        print(f"saved state -> {args.save_state}")
    return 0


def _replay_features(args, config, log_path, alerts_spec) -> int:
    rows = load_feature_dataset(args.trace)
    if args.state:
        det = load_state(args.state, config, online=bool(args.online))
        if det.mode != Mode.FEATURES:
            raise ValueError(f"state file holds a {det.mode.value} detector, expected features")
        result = run_features(rows, config, detector=det)
    else:
        result = run_features(rows, config, online=bool(args.online))
    if not result.decisions:
        raise ValueError("feature file ended before init completed; no decisions were made")
    if log_path:
        write_decision_log(result.decisions, log_path)
    if alerts_spec:
        alerts = _open_alerts(alerts_spec)
        try:
            for decision in result.decisions:
                if decision.is_attack:
                    _emit_alert(alerts, decision)
        finally:
            if alerts is not sys.stdout:
                alerts.close()
    _score_and_report(args, config, result.decisions, result.labels, result.attack_types)
    if args.save_state:
        save_state(result.detector, args.save_state)
        print(f"saved state -> {args.save_state}")
    return 0


def _replay_devices(args, config, log_path, alerts_spec) -> int:
    trace = load_trace(args.trace)
    bank = DeviceBank(config)
    log = _DecisionLogWriter(log_path)
    alerts = _open_alerts(alerts_spec)
    try:
        for pkt in trace:
            for addr, decision in bank.ingest(pkt):
                log.write(decision)
                if alerts is not None and decision.is_attack:
                    _emit_alert(alerts, decision, addr=addr)
    finally:
        log.close()
        if alerts is not None and alerts is not sys.stdout:
            alerts.close()

    report = bank.report()
    print(f"{report.packets} packets, {len(report.devices)} devices, "
          f"{len(report.compromised)} compromised")
    for row in report.devices[:10]:
        flag = "COMPROMISED" if row.is_compromised else ""
        print(f"  {row.addr:18s} level {row.infection_level:.3f} "
              f"peak {row.peak_level:.3f} decisions {row.decisions_count} {flag}")
    if args.report:
        doc = report.to_dict()
        doc["config"] = config.to_dict()
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
    if args.plots:
        for path in emit_plot_data(report, args.plots):
            print(f"wrote {path}")
    return 0


# -- eval ---------------------------------------------------------------------


def _parse_assertions(spec: str) -> List[tuple]:
    out = []
    for clause in spec.split(","):
        clause = clause.strip()
        if not clause:
            continue
        for op in _ASSERT_OPS:
            if op in clause:
                name, value = clause.split(op, 1)
                name = name.strip().lower()
                if name not in _ASSERT_METRICS:
                    raise ValueError(f"unknown metric in assertion: {name!r}")
                out.append((name, op, float(value)))
                break
        else:
            raise ValueError(f"cannot parse assertion clause: {clause!r}")
    if not out:
        raise ValueError("empty assertion spec")
    return out


def _check_assertion(actual: Optional[float], op: str, expected: float) -> bool:
    if actual is None:
        return False
    return {"<=": actual <= expected, ">=": actual >= expected, "==": actual == expected,
            "<": actual < expected, ">": actual > expected}[op]


def cmd_eval(args) -> int:
    config = _build_config(args)
    decisions = read_decision_log(args.log)
    trace = load_trace(args.trace)
    labels, types = align_with_trace(decisions, trace)
    report = score(decisions, labels, types, config)
    print(report.summary())
    if report.per_attack_type:
        print("per-attack-type accuracy:")
        for name, acc in report.per_attack_type.items():
            print(f"  {name:24s} {acc:8.2f}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
    if args.plots:
        for path in emit_plot_data(report, args.plots):
            print(f"wrote {path}")
    if args.assertions:
        failed = False
        for name, op, expected in _parse_assertions(args.assertions):
            actual = getattr(report, name)
            ok = _check_assertion(actual, op, expected)
            shown = "n/a" if actual is None else f"{actual:.2f}"
            print(f"assert {name} {op} {expected:g}: {shown} -> {'ok' if ok else 'VIOLATED'}")
            failed = failed or not ok
        if failed:
            return 1
    return 0


# -- synth ----------------------------------------------------------------------


def cmd_synth(args) -> int:
    attacks = []
    for flood in args.flood or []:
        parts = flood.split(":")
        if len(parts) != 3:
            raise ValueError(f"--flood must be START:END:MULTIPLIER, got {flood!r}")
        attacks.append(AttackSegment(
            start_s=float(parts[0]), end_s=float(parts[1]), rate_multiplier=float(parts[2]),
            attackers=tuple(args.attacker) if args.attacker else ("198.51.100.66",),
            victims=() if args.spray else (tuple(args.victim) if args.victim else ("10.0.0.1",)),
            spray=args.spray, size_mean=args.attack_size_mean,
            size_sigma=args.attack_size_sigma))
    spec = TraceSpec(duration_s=args.duration, rate_pps=args.rate,
                     hosts=tuple(args.hosts.split(",")) if args.hosts else ("10.0.0.1", "10.0.0.2"),
                     size_mean=args.size_mean, size_sigma=args.size_sigma,
                     rate_ramp=args.ramp, attacks=tuple(attacks))
    trace = synth_trace(spec, args.seed)
    save_trace(trace, args.out)
    n_attack = sum(1 for p in trace if p.label)
    print(f"wrote {len(trace)} packets ({n_attack} attack) -> {args.out}")
    return 0


# -- bench -----------------------------------------------------------------------


def cmd_bench(args) -> int:
    checks = bench_mod.run_all(seed=args.seed)
    for check in checks:
        print(check.line())
    failed = sum(1 for c in checks if not c.passed)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return 1 if failed else 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aadetect",
        description="Auto-associative anomaly detection for network traffic")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                       help="override one config key (repeatable)")

    p = sub.add_parser("init", help="fit scaling, model, and threshold on benign data")
    p.add_argument("trace", help="trace CSV (or feature CSV with --features)")
    p.add_argument("--out", required=True, help="state file to write")
    p.add_argument("--features", action="store_true", help="input is a feature CSV")
    add_config_args(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("replay", help="run detection over a trace or feature file")
    p.add_argument("trace", help="trace CSV (or feature CSV with --features)")
    p.add_argument("--state", help="start from a saved state file")
    p.add_argument("--cold-start", action="store_true",
                   help="initialize from the head of the input (default without --state)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--online", action="store_true",
                      help="keep learning on windows of benign-judged rows")
    mode.add_argument("--frozen", action="store_true", help="never update the model")
    p.add_argument("--devices", action="store_true", help="per-device monitoring")
    p.add_argument("--features", action="store_true", help="input is a feature CSV")
    p.add_argument("--log", help="decision log CSV to write")
    p.add_argument("--alerts", help="alert stream file, or - for stdout")
    p.add_argument("--report", help="report JSON to write")
    p.add_argument("--plots", help="directory for plot-data CSVs")
    p.add_argument("--save-state", help="persist detector state after the run")
    add_config_args(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("eval", help="score a decision log against trace ground truth")
    p.add_argument("--log", required=True, help="decision log CSV")
    p.add_argument("--trace", required=True, help="trace CSV with labels")
    p.add_argument("--report", help="report JSON to write")
    p.add_argument("--plots", help="directory for plot-data CSVs")
    p.add_argument("--assert", dest="assertions", metavar="SPEC",
                   help='e.g. "accuracy>=99,fpr<=1"; exit 1 on violation')
    add_config_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="generate a labeled synthetic trace")
    p.add_argument("--out", required=True)
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--rate", type=float, required=True, help="benign packets/second")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hosts", help="comma-separated host addresses")
    p.add_argument("--ramp", type=float, default=1.0,
                   help="final/initial benign rate ratio (default 1: stationary)")
    p.add_argument("--size-mean", type=float, default=500.0)
    p.add_argument("--size-sigma", type=float, default=150.0)
    p.add_argument("--flood", action="append", metavar="START:END:MULT",
                   help="attack segment (repeatable)")
    p.add_argument("--attacker", action="append", help="attack source address (repeatable)")
    p.add_argument("--victim", action="append", help="attack destination address (repeatable)")
    p.add_argument("--spray", type=int, default=0,
                   help="spray attack traffic across N external addresses")
    p.add_argument("--attack-size-mean", type=float, default=80.0)
    p.add_argument("--attack-size-sigma", type=float, default=10.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="run the desk-scale benchmark checks")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # Downstream consumer (e.g. `... --alerts - | head`) closed the pipe.
        # Point stdout at devnull so interpreter shutdown does not complain.
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 141  # 128 + SIGPIPE, the conventional shell status
    except (ValueError, OSError, LifecycleError, DimensionError, TraceParseError,
            KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
