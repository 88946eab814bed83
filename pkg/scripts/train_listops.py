"""Desk-scale ListOps training run with periodic evaluation."""
import argparse
import json
import time
from dataclasses import replace

import numpy as np

from arena.bench.cli import parse_attention
from arena.bench.tasks import synthetic_task_data
from arena.model import DESK_PRESETS, build_encoder, train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=1500)
    ap.add_argument("--max-depth", type=int, default=4)
    ap.add_argument("--min-len", type=int, default=0)
    ap.add_argument("--max-len", type=int, default=128)
    ap.add_argument("--n-train", type=int, default=5000)
    ap.add_argument("--n-eval", type=int, default=1000)
    ap.add_argument("--attention", default="full")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write the history as JSON here")
    args = ap.parse_args()

    preset = DESK_PRESETS["listops"]
    enc = replace(preset["encoder"], max_len=args.max_len + 1).with_attention(parse_attention(args.attention))
    tc = replace(preset["train"], steps=args.steps, seed=args.seed, eval_every=max(1, args.steps // 6),
                 warmup_steps=min(preset["train"].warmup_steps, args.steps))
    data = synthetic_task_data("listops", args.n_train + args.n_eval, args.max_len, args.seed,
                               max_depth=args.max_depth, min_len=args.min_len)
    tr, ev = data[:args.n_train], data[args.n_train:]
    labels = np.array([l for _, l in ev])
    print(f"eval majority baseline {np.bincount(labels, minlength=10).max() / len(labels):.3f}, "
          f"mean length {np.mean([int(s.length) for s, _ in ev]):.1f}")
    t0 = time.perf_counter()
    _, hist = train(build_encoder(enc, args.seed), tc, tr, eval_set=ev)
    for step, acc in zip(hist.eval_steps, hist.eval_accuracy):
        print(f"step {step:>6}  eval accuracy {acc:.3f}")
    print(f"{time.perf_counter() - t0:.0f}s")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(hist.to_dict(), fh)


if __name__ == "__main__":
    main()
