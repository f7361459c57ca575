#!/usr/bin/env python3
"""Desk-scale training of the shipped TCN architectures on synthetic windows.

Trains a float PyTorch replica of each network with a smooth-L1 loss, converts the
weights to int8 with post-training calibration and writes the result next
to the architecture files in ``src/chris/data``. Needs the ``train`` extra
(torch). The networks learn only the synthetic signal model; numbers say
nothing about accuracy on real wrist data.

    python scripts/train_tcn.py --model small --epochs 40
    python scripts/train_tcn.py --model big --epochs 20 --lr 2e-3
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np
import torch
from torch import nn

from chris.predictors import ModelKind, shipped_spec
from chris.predictors.tcn import (
    FloatWeights,
    TcnSpec,
    normalize_input,
    quantize_model,
    save_model,
    tcn_infer,
)
from chris.signal import synth_window

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "chris" / "data"
HR_CENTER, HR_SCALE = 110.0, 50.0


class TorchTcn(nn.Module):
    def __init__(self, spec: TcnSpec) -> None:
        super().__init__()
        self.spec = spec
        self.convs = nn.ModuleList(
            nn.Conv1d(l.c_in, l.c_out, l.kernel, stride=l.stride, padding=l.padding,
                      dilation=l.dilation)
            for l in spec.layers
        )
        self.head = nn.Linear(spec.head.n_inputs, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        convs = iter(self.convs)
        for block in self.spec.blocks:
            for layer in block.layers:
                x = next(convs)(x)
                if layer.relu:
                    x = torch.relu(x)
            if block.pool > 1:
                x = nn.functional.avg_pool1d(x, block.pool)
        x = nn.functional.avg_pool1d(x, x.shape[-1] // self.spec.head.bins)
        return self.head(x.flatten(1)).squeeze(-1)

    def float_weights(self) -> FloatWeights:
        conv = [(c.weight.detach().double().numpy(), c.bias.detach().double().numpy())
                for c in self.convs]
        # Fold the target normalization into the head.
        w = self.head.weight.detach().double().numpy()[0] * HR_SCALE
        b = float(self.head.bias.detach().double()) * HR_SCALE + HR_CENTER
        return FloatWeights(conv=conv, head_weight=w, head_bias=b)


def make_windows(n: int, seed: int):
    rng = np.random.default_rng(seed)
    hrs = rng.uniform(40.0, 200.0, size=n)
    acts = rng.integers(1, 10, size=n)
    seeds = rng.integers(0, 2**31, size=n)
    return [synth_window(float(h), int(a), int(s)) for h, a, s in zip(hrs, acts, seeds)]


def to_tensors(windows):
    x = torch.tensor(np.stack([normalize_input(w) for w in windows]), dtype=torch.float32)
    y = torch.tensor([(w.hr_ref - HR_CENTER) / HR_SCALE for w in windows], dtype=torch.float32)
    return x, y


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", choices=("small", "big"), required=True)
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--train", type=int, default=20000)
    ap.add_argument("--batch", type=int, default=128)
    ap.add_argument("--lr", type=float, default=3e-3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    kind = ModelKind.SMALL if args.model == "small" else ModelKind.BIG
    spec = shipped_spec(kind)
    torch.manual_seed(args.seed)
    train_x, train_y = to_tensors(make_windows(args.train, args.seed))
    val = make_windows(900, args.seed + 1)
    val_x, val_y = to_tensors(val)

    net = TorchTcn(spec)
    opt = torch.optim.AdamW(net.parameters(), lr=args.lr, weight_decay=1e-4)
    sched = torch.optim.lr_scheduler.OneCycleLR(
        opt, max_lr=args.lr, total_steps=args.epochs * (len(train_y) // args.batch + 1))
    for epoch in range(args.epochs):
        t0 = time.time()
        net.train()
        perm = torch.randperm(len(train_y))
        for i in range(0, len(perm), args.batch):
            idx = perm[i : i + args.batch]
            loss = nn.functional.smooth_l1_loss(net(train_x[idx]), train_y[idx], beta=0.05)
            opt.zero_grad()
            loss.backward()
            opt.step()
            sched.step()
        net.eval()
        with torch.no_grad():
            mae = float((net(val_x) - val_y).abs().mean()) * HR_SCALE
        print(f"epoch {epoch + 1}/{args.epochs}: val MAE {mae:.2f} BPM ({time.time() - t0:.1f}s)",
              flush=True)

    qspec, qweights = quantize_model(spec, net.float_weights(), make_windows(256, args.seed + 2))
    hr = np.array([tcn_infer(qspec, qweights, w) for w in val])
    ref = np.array([w.hr_ref for w in val])
    print(f"int8 val MAE {np.mean(np.abs(hr - ref)):.2f} BPM")
    out = DATA_DIR / f"timeppg_{args.model}.json"
    save_model(out, qspec, qweights)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
