"""Command-line entry point: ``arena <subcommand> [--config cfg.json] [flags]``.

Flags override values from ``--config``. ``--seed`` falls back to the
ARENA_SEED environment variable, then 0.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from ..attention import AttentionSpec
from ..data import load_cifar_sequences
from ..errors import ArenaError, ConfigError
from ..metrics import required_span
from ..model import DESK_PRESETS, EncoderConfig, TrainConfig, build_encoder, evaluate, load_checkpoint, \
    save_checkpoint, train
from ..substrate import Rng
from ..tasks import gen_listops, gen_pathfinder, sidecar_for, write_listops_tsv, write_pixel_records
from ..tasks.pathfinder import PathfinderParams
from .harness import CSV_COLUMNS, SuiteConfig, default_seed, run_suite
from .tasks import TASKS, load_task_data, synthetic_task_data, task_info

log = logging.getLogger("arena")

# Named mechanisms for --attention; a JSON object is accepted too.
NAMED_MECHANISMS = {
    "full": AttentionSpec.full(),
    "local": AttentionSpec.pattern("local", window=32),
    "sparse": AttentionSpec.pattern("strided", window=32, stride=32),
    "longformer": AttentionSpec.pattern("longformer", window=32, num_global=1),
    "bigbird": AttentionSpec.pattern("bigbird", window=32, num_global=1, num_random=3),
    "linformer": AttentionSpec.linformer(64, True),
    "linear": AttentionSpec.kernel("elu1"),
    "performer": AttentionSpec.kernel("favor_plus", 64),
    "reformer": AttentionSpec.lsh(2, 32, True),
    "sinkhorn": AttentionSpec.sinkhorn(32, 8),
    "synthesizer": AttentionSpec.synthesizer("dense"),
    "synthesizer-random": AttentionSpec.synthesizer("random"),
}


def parse_attention(value: str) -> AttentionSpec:
    if value in NAMED_MECHANISMS:
        return NAMED_MECHANISMS[value]
    try:
        data = json.loads(value)
    except json.JSONDecodeError:
        raise ConfigError(f"--attention must be one of {sorted(NAMED_MECHANISMS)} or a JSON object") from None
    if not isinstance(data, dict):
        raise ConfigError("--attention JSON must be an object")
    return AttentionSpec.from_dict(data)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON file of defaults; explicit flags win")
    p.add_argument("--seed", type=int, default=None, help="defaults to $ARENA_SEED, then 0")
    p.add_argument("--json-errors", action="store_true", help="errors as one JSON line on stderr")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="arena", description="Efficient-attention benchmark tools")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-listops", help="write a ListOps TSV")
    _common(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--n", type=int)
    p.add_argument("--max-len", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-len", type=int)
    p.add_argument("--max-args", type=int)

    p = sub.add_parser("gen-pathfinder", help="write Pathfinder pixel records plus a JSON sidecar")
    _common(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--n", type=int)
    p.add_argument("--size", type=int, choices=(32, 128))
    p.add_argument("--distractors", type=int)

    p = sub.add_parser("ingest-cifar", help="convert CIFAR-10 binary batches to grayscale pixel records")
    _common(p)
    p.add_argument("--input", type=Path, nargs="+")
    p.add_argument("--out", type=Path)

    p = sub.add_parser("train", help="train an encoder and save a checkpoint")
    _common(p)
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--data", type=Path, help="dataset file; synthetic tasks generate data when omitted")
    p.add_argument("--eval-data", type=Path)
    p.add_argument("--attention")
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-eval", type=int)
    p.add_argument("--out", type=Path, help="checkpoint path")

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    _common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--data", type=Path)
    p.add_argument("--n", type=int)

    p = sub.add_parser("bench", help="throughput and peak memory over mechanisms x lengths")
    _common(p)
    p.add_argument("--out", type=Path)
    p.add_argument("--seq-lens", type=int, nargs="+")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--attention", nargs="+")

    p = sub.add_parser("span", help="required attention span of a checkpoint")
    _common(p)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--task", choices=sorted(TASKS))
    p.add_argument("--data", type=Path)
    p.add_argument("--samples", type=int)
    p.add_argument("--exclude-cls", action="store_true", default=None)
    p.add_argument("--normalize", action="store_true", default=None)

    p = sub.add_parser("report", help="print a bench report as a table")
    _common(p)
    p.add_argument("--input", type=Path)
    p.add_argument("--csv", type=Path, help="also rewrite the rows as CSV here")
    return ap


def _settings(args) -> dict:
    """Merge --config JSON with explicitly given flags."""
    base = {}
    if args.config is not None:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file {args.config} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(base, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
    for k, v in vars(args).items():
        if k in ("config", "command", "json_errors", "verbose") or v is None:
            continue
        base[k] = v
    base.setdefault("seed", default_seed())
    return base


def _need(s: dict, key: str, default=None):
    if key in s:
        return s[key]
    if default is None:
        raise ConfigError(f"missing required setting --{key.replace('_', '-')}")
    return default


def cmd_gen_listops(s: dict) -> int:
    out = Path(_need(s, "out"))
    samples = gen_listops(Rng(s["seed"]), _need(s, "max_len", 2000), _need(s, "max_depth", 10), _need(s, "n", 1000),
                          min_len=s.get("min_len", 0), max_args=s.get("max_args", 5))
    write_listops_tsv(out, samples)
    print(f"wrote {len(samples)} ListOps samples to {out}")
    return 0


def cmd_gen_pathfinder(s: dict) -> int:
    out = Path(_need(s, "out"))
    size, n, dist = _need(s, "size", 32), _need(s, "n", 1000), _need(s, "distractors", 2)
    samples = gen_pathfinder(Rng(s["seed"]), size, n, dist)
    write_pixel_records(out, samples, sidecar_for(PathfinderParams(size=size, distractors=dist), s["seed"], n))
    pos = sum(l for _, l in samples)
    print(f"wrote {n} Pathfinder {size}x{size} samples to {out} ({pos} positive)")
    return 0


def cmd_ingest_cifar(s: dict) -> int:
    inputs = _need(s, "input")
    inputs = [inputs] if isinstance(inputs, (str, Path)) else inputs
    out = Path(_need(s, "out"))
    samples = load_cifar_sequences(inputs)
    write_pixel_records(out, samples, {"source": [str(p) for p in inputs], "grayscale": "(299R+587G+114B+500)//1000"})
    print(f"wrote {len(samples)} grayscale images to {out}")
    return 0


def _train_data(s: dict, task: str, max_tokens: int):
    n_train, n_eval = s.get("n_train", 512), s.get("n_eval", 128)
    if s.get("data"):
        data = load_task_data(task, s["data"], max_tokens)
        if s.get("eval_data"):
            return data, load_task_data(task, s["eval_data"], max_tokens)
        cut = max(1, len(data) - max(1, len(data) // 5))
        return data[:cut], data[cut:]
    data = synthetic_task_data(task, n_train + n_eval, max_tokens, s["seed"])
    return data[:n_train], data[n_train:]


def cmd_train(s: dict) -> int:
    task = _need(s, "task")
    info = task_info(task)
    preset = DESK_PRESETS[task]
    enc = EncoderConfig.from_dict(s["encoder"]) if "encoder" in s else preset["encoder"]
    enc = replace(enc, vocab_size=info.vocab_size, num_classes=info.num_classes, head_kind=info.head_kind)
    if "attention" in s:
        att = s["attention"]
        enc = enc.with_attention(AttentionSpec.from_dict(att) if isinstance(att, dict) else parse_attention(att))
    tc = TrainConfig.from_dict(s["train"]) if "train" in s else preset["train"]
    steps = s.get("steps", tc.steps)
    tc = replace(tc, seed=s["seed"], steps=steps, warmup_steps=min(tc.warmup_steps, steps),
                 batch_size=s.get("batch_size", tc.batch_size), learning_rate=s.get("lr", tc.learning_rate))
    tr, ev = _train_data(s, task, enc.max_tokens)
    params = build_encoder(enc, Rng(s["seed"]))
    params, hist = train(params, tc, tr)
    acc = evaluate(params, ev) if ev else None
    out = Path(_need(s, "out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, out, {"task": task, "train": tc.to_dict(), "eval_accuracy": acc})
    Path(str(out) + ".history.json").write_text(json.dumps(hist.to_dict(), sort_keys=True) + "\n")
    print(json.dumps({"checkpoint": str(out), "final_loss": hist.loss[-1] if hist.loss else None,
                      "eval_accuracy": acc}, sort_keys=True))
    return 0


def _checkpoint_data(s: dict):
    params, extra = load_checkpoint(_need(s, "checkpoint"))
    task = s.get("task") or extra.get("task")
    if task is None:
        raise ConfigError("the checkpoint records no task; pass --task")
    if s.get("data"):
        data = load_task_data(task, s["data"], params.config.max_tokens)
    else:
        data = synthetic_task_data(task, s.get("n", s.get("samples", 128)), params.config.max_tokens, s["seed"])
    return params, task, data


def cmd_eval(s: dict) -> int:
    params, task, data = _checkpoint_data(s)
    print(json.dumps({"task": task, "examples": len(data), "accuracy": evaluate(params, data)}, sort_keys=True))
    return 0


def cmd_span(s: dict) -> int:
    params, task, data = _checkpoint_data(s)
    rep = required_span(params, data, samples=s.get("samples", 1000), exclude_cls=bool(s.get("exclude_cls")),
                        normalize=bool(s.get("normalize")))
    print(json.dumps({"task": task, "mechanism": params.config.attention.label, **rep.to_dict()}, sort_keys=True))
    return 0


def cmd_bench(s: dict) -> int:
    s = dict(s)
    if "attention" in s:
        s["mechanisms"] = [parse_attention(a).to_dict() for a in s.pop("attention")]
    renames = {"out": "out_dir", "warmup": "warmup_steps", "steps": "measured_steps"}
    for old, new in renames.items():
        if old in s:
            s[new] = str(s.pop(old)) if old == "out" else s.pop(old)
    s.setdefault("encoder", DESK_PRESETS["text"]["encoder"].to_dict())
    cfg = SuiteConfig.from_dict(s)
    report = run_suite(cfg)
    paths = report.write(cfg.out_dir)
    for kind, path in sorted(paths.items()):
        print(f"{kind}: {path}")
    for f in report.failures:
        print(f"FAILED {f['mechanism']} {f['task']} N={f['seq_len']}: {f['error']}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_report(s: dict) -> int:
    doc = json.loads(Path(_need(s, "input")).read_text(encoding="utf-8"))
    from .schema import validate

    validate(doc, "bench_report")
    rows = doc["rows"]
    md = doc["metadata"]
    print(f"seed {md['seed']}  batch {md['batch_size']}  config {md['config_hash'][:12]}  {md['timestamp']}")
    print(f"throughput: {md['throughput_unit']}")
    print(f"{'mechanism':<22}{'task':<12}{'N':>6}{'steps/s':>10}{'peak MB':>10}{'vs full':>9}")
    for r in rows:
        rel = r.get("relative_speedup_vs_full")
        peak = r.get("peak_tensor_bytes")
        print(f"{r['mechanism']:<22}{r['task']:<12}{r['seq_len']:>6}{r['steps_per_sec']:>10.3f}"
              f"{'-' if peak is None else f'{peak / 2**20:.1f}':>10}{'-' if rel is None else f'{rel:.2f}x':>9}")
    for e in doc["speed_excluded"]:
        print(f"{e['mechanism']:<22}{e['task']:<12}{e['seq_len']:>6}  excluded: {e['reason']}")
    if s.get("csv"):
        with open(s["csv"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in rows:
                w.writerow(["" if r.get(c) is None else r.get(c) for c in CSV_COLUMNS])
    return 0 if not doc["failures"] else 1


COMMANDS = {
    "gen-listops": cmd_gen_listops,
    "gen-pathfinder": cmd_gen_pathfinder,
    "ingest-cifar": cmd_ingest_cifar,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "span": cmd_span,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](_settings(args))
    except (ArenaError, OSError) as exc:
        kind = getattr(exc, "kind", "io_error")
        if args.json_errors:
            print(json.dumps({"error": kind, "command": args.command, "message": str(exc)}), file=sys.stderr)
        else:
            print(f"arena {args.command}: {kind}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
