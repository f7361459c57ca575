"""What happens on the watch when the phone link drops for a while.

The engine runs with an energy budget. While connected it offloads hard
windows; during the outage it falls back to the best Local configuration
and the phone sees no traffic.

    python demos/02_link_outage.py
"""

from __future__ import annotations

from chris.difficulty import oracle_classifier
from chris.energy import default_profiles
from chris.engine import ConnectionStatus, MaxEnergy
from chris.predictors import ModelKind
from chris.signal import synth_trace, windows
from chris.sim import LinkSchedule, run, sweep
from chris.zoo import local_front, pareto_filter

trace = synth_trace([1, 9, 3, 7, 2, 8], 25, [70, 140, 80, 125, 75, 135], seed=8)
n = len(windows(trace))
profiles = default_profiles()

measured = [c for c, _ in sweep(trace, tuple(ModelKind), oracle_classifier, profiles)]
table, local = pareto_filter(measured), local_front(measured)

schedule = LinkSchedule((
    (0, 50, ConnectionStatus.CONNECTED),
    (50, 100, ConnectionStatus.DISCONNECTED),
    (100, n, ConnectionStatus.CONNECTED),
))
report = run(trace, table, oracle_classifier, profiles, MaxEnergy(0.5), schedule,
             local_table=local)

for idx, config, soft in report.config_switches:
    print(f"window {idx:3d}: {config.label()}{' (soft violation)' if soft else ''}")

for name, (lo, hi) in {"before": (0, 50), "outage": (50, 100), "after": (100, n)}.items():
    recs = report.records[lo:hi]
    phone = sum(r.device is not None and r.device.value == "Phone" for r in recs)
    watch = sum(r.watch_mj for r in recs) / len(recs)
    print(f"{name:7s} offloaded {phone:3d}/{len(recs)} windows, {watch:.3f} mJ/window on the watch")

s = report.summary()
print(f"\noverall MAE {s['mae_bpm']:.2f} BPM, offload {s['offload_fraction']:.2f}")
