"""Size and fidelity of the int8 temporal convolutional networks.

Prints the per-layer geometry and operation counts of the shipped networks,
then compares the integer pipeline with a float pipeline running on the
same (dequantized) weights.

    python demos/03_int8_network.py
"""

from __future__ import annotations

import numpy as np

from chris.predictors import ModelKind, shipped_model
from chris.predictors.tcn import conv_ops, count_ops, random_model, tcn_infer, tcn_reference
from chris.signal import synth_window

for kind in (ModelKind.SMALL, ModelKind.BIG):
    spec, weights = shipped_model(kind)
    ops = count_ops(spec)
    print(f"{kind}: {ops.params:,} parameters, {ops.macs:,} MACs per window")
    length = spec.input_len
    for i, (layer, out_len) in enumerate(zip(spec.layers, spec.lengths())):
        layer_ops = conv_ops(layer, length)
        print(f"  conv{i}: {layer.c_in:3d}->{layer.c_out:3d} k={layer.kernel} d={layer.dilation}"
              f" s={layer.stride}  len {length:3d}->{out_len:3d}  {layer_ops.macs:>10,} MACs")
        length = out_len
        if i % 3 == 2:
            length //= spec.blocks[i // 3].pool

    if weights is None:
        spec, weights = random_model(spec, seed=0)
        print("  (no bundled weights, using a seeded random network)")
    tests = [synth_window(bpm, a, seed) for seed, (bpm, a) in
             enumerate([(55.0, 1), (90.0, 3), (120.0, 6), (170.0, 9)])]
    gaps = [abs(tcn_infer(spec, weights, w) - tcn_reference(spec, weights, w)) for w in tests]
    est = [tcn_infer(spec, weights, w) for w in tests]
    print("  reference  " + "  ".join(f"{w.hr_ref:6.1f}" for w in tests))
    print("  int8       " + "  ".join(f"{e:6.1f}" for e in est))
    print(f"  max |int8 - float| = {max(gaps):.3f} BPM, mean {np.mean(gaps):.3f}\n")
