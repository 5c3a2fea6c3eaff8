"""Find WHICH device went rogue, not just that something did.

Every IP address seen on the wire gets its own detector over six
directional metrics (bytes, inter-arrival, and packet count — transmitted
and received separately). Each detector trains on that device's own early
traffic, so a chatty sensor and a quiet camera each learn their own
normal. A per-device infection level (an exponential moving average of
the detector's alarm strength) separates sustained compromise from
one-off blips; consecutive high decisions flip the compromised flag.

Here four LAN hosts behave normally for 60 seconds, then 10.0.0.3 starts
spraying a high-rate flood across 1024 external addresses.

Run:  python3 demos/device_identification.py
"""

from aadetect import AttackSegment, DeviceBank, TraceSpec, config_from_dict, synth_trace

config = config_from_dict({"metrics": {"N": 30}})

trace = synth_trace(TraceSpec(
    duration_s=120.0,
    rate_pps=24.0,
    hosts=("10.0.0.1", "10.0.0.2", "10.0.0.3", "10.0.0.4"),
    attacks=(AttackSegment(start_s=60.0, end_s=120.0, rate_multiplier=10.0,
                           attackers=("10.0.0.3",), spray=1024),),
), seed=5)
print(f"trace: {len(trace)} packets over 4 LAN hosts; "
      f"10.0.0.3 starts flooding at t=60s")

bank = DeviceBank(config)
for pkt in trace:
    bank.ingest(pkt)

report = bank.report()
print(f"{len(report.devices)} devices tracked "
      f"({report.packets} packets); LAN hosts:")
print(f"  {'address':12s} {'infection':>9s} {'peak':>6s}  {'status'}")
for row in report.devices:
    if not row.addr.startswith("10.0.0."):
        continue
    status = "COMPROMISED" if row.is_compromised else "clean"
    print(f"  {row.addr:12s} {row.infection_level:9.3f} {row.peak_level:6.3f}  {status}")
print(f"compromised: {list(report.compromised)}")
