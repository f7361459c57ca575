"""Walk the MAE/energy trade-off of every configuration on a synthetic trace.

A 9-activity trace is routed through all 60 configurations with a trained
activity forest. The front printed at the end is what the decision engine
chooses from at run time.

    python demos/01_threshold_sweep.py
"""

from __future__ import annotations

from chris.difficulty import rf_train, window_dataset
from chris.energy import default_profiles
from chris.engine import MaxEnergy, MaxMae, select
from chris.predictors import ModelKind
from chris.signal import synth_trace, windows
from chris.sim import sweep
from chris.zoo import Execution, pareto_filter

# Heart rate drifts upward as activity gets more intense.
rates = [65, 72, 80, 88, 95, 105, 118, 130, 145]
trace = synth_trace(range(1, 10), 40, rates, seed=3)
wins = windows(trace)

forest = rf_train(window_dataset(windows(synth_trace(range(1, 10), 60, 90.0, seed=4))))
profiles = default_profiles()

results = sweep(wins, tuple(ModelKind), forest, profiles)
print(f"{len(results)} configurations on {len(wins)} windows\n")

# The threshold knob on the offloading pair: more easy windows, less radio.
print("AT + Big, Hybrid")
print("  t   MAE (BPM)  watch (mJ)  offload")
for config, _ in results:
    if (config.simple, config.complex, config.execution) == (
            ModelKind.AT, ModelKind.BIG, Execution.HYBRID):
        print(f"  {config.threshold}  {config.avg_mae_bpm:9.2f}  {config.avg_watch_mj:10.3f}"
              f"  {config.offload_fraction:7.2f}")

front = pareto_filter([c for c, _ in results], dataset_id="demo")
print(f"\nPareto front ({len(front)} rows)")
for c in front:
    print(f"  {c.label():40s} {c.avg_mae_bpm:6.2f} BPM  {c.avg_watch_mj:7.3f} mJ")

for constraint in (MaxMae(3.0), MaxEnergy(0.3)):
    chosen = select(front, constraint)
    flag = " (closest, constraint not met)" if chosen.soft_violation else ""
    print(f"\n{constraint}: {chosen.config.label()}{flag}")
