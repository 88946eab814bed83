"""Required attention span after desk training on ListOps versus a local toy task.

The local task labels a random 4-symbol sequence by whether more than a
quarter of adjacent pairs repeat; it only needs neighbouring tokens. Both
datasets share the same sequence lengths so span differences come from
training, not from N.
"""
import argparse
from dataclasses import replace

import numpy as np

from arena.bench.tasks import synthetic_task_data
from arena.metrics import required_span
from arena.model import DESK_PRESETS, TrainConfig, build_encoder, evaluate, train
from arena.tokens import TokenSequence


def local_task(like, seed):
    rng = np.random.default_rng(seed)
    out = []
    for seq, _ in like:
        ids = rng.integers(0, 4, size=int(seq.length))
        out.append((TokenSequence.of(ids), int((ids[1:] == ids[:-1]).mean() > 0.25)))
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3])
    ap.add_argument("--steps", type=int, default=600)
    ap.add_argument("--n", type=int, default=600)
    args = ap.parse_args()
    enc = replace(DESK_PRESETS["listops"]["encoder"], max_len=65)
    lo = synthetic_task_data("listops", args.n, 64, 0, min_len=48)
    lc = local_task(lo, 5)
    cut = args.n - 100
    print(f"{'seed':>4} {'listops span':>13} {'local span':>11} {'listops acc':>12} {'local acc':>10}")
    for seed in args.seeds:
        tc = TrainConfig(steps=args.steps, batch_size=32, learning_rate=1e-3, warmup_steps=30, seed=seed)
        row = []
        for data in (lo, lc):
            p, _ = train(build_encoder(enc, seed), tc, data[:cut])
            row.append((required_span(p, data[cut:]).aggregate, evaluate(p, data[cut:])))
        print(f"{seed:>4} {row[0][0]:>13.3f} {row[1][0]:>11.3f} {row[0][1]:>12.3f} {row[1][1]:>10.3f}")


if __name__ == "__main__":
    main()
