"""Throughput, peak-memory, and suite runs over mechanisms x sequence lengths."""
from __future__ import annotations

import csv
import gc
import hashlib
import json
import logging
import os
import platform
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..attention import (
    AttentionSpec, full_attention, kernel_attention, linformer_attention, orthogonal_gaussian,
)
from ..errors import ArenaError, ConfigError, ContractError, TrainingError
from ..metrics import required_span
from ..model import (
    Adam, EncoderConfig, ForwardContext, ModelParams, TrainConfig, build_encoder, evaluate, loss_and_grads, train,
)
from ..substrate import Rng, Tensor, measure_scope, no_record
from .schema import validate
from .tasks import TaskInfo, random_batch, synthetic_task_data, task_info

log = logging.getLogger(__name__)

DEFAULT_LENGTHS = (1024, 2048, 3072, 4096)
CSV_COLUMNS = ("mechanism", "task", "seq_len", "batch_size", "steps_per_sec", "peak_tensor_bytes",
               "attention_op_peak_bytes", "relative_speedup_vs_full", "accuracy", "span")
TRADEOFF_COLUMNS = ("mechanism", "task", "accuracy", "steps_per_sec", "peak_tensor_bytes", "seq_len")
ESTIMATORS = ("median", "window")
THROUGHPUT_UNIT = "full train steps (forward + backward + Adam update) per second"


def config_hash(obj) -> str:
    """SHA-256 of canonical JSON, so key order never changes the hash."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def default_seed() -> int:
    return int(os.environ.get("ARENA_SEED", "0"))


@dataclass(frozen=True)
class SuiteConfig:
    mechanisms: tuple[AttentionSpec, ...]
    encoder: EncoderConfig
    tasks: tuple[str, ...] = ("text",)
    seq_lens: tuple[int, ...] = DEFAULT_LENGTHS
    batch_size: int = 8
    warmup_steps: int = 10
    measured_steps: int = 50
    seed: int = 0
    out_dir: str = "bench_out"
    measure_memory: bool = True
    train_steps: int = 0         # > 0 trains each (mechanism, task) briefly for accuracy
    train_examples: int = 256
    eval_examples: int = 128
    train_len: int = 128
    learning_rate: float = 1e-3
    span: bool = False
    hardware_note: str = ""

    def __post_init__(self):
        if not self.mechanisms:
            raise ConfigError("the suite needs at least one mechanism")
        if not self.tasks:
            raise ConfigError("the suite needs at least one task")
        if self.measured_steps < 1:
            raise ConfigError(f"measured_steps must be >= 1, got {self.measured_steps}")
        if self.warmup_steps < 0 or self.batch_size < 1:
            raise ConfigError("warmup_steps must be >= 0 and batch_size >= 1")
        if not self.seq_lens or min(self.seq_lens) < 1:
            raise ConfigError("seq_lens must be non-empty positive lengths")
        if max(self.seq_lens) > self.encoder.max_tokens:
            raise ConfigError(f"length {max(self.seq_lens)} exceeds the encoder's max_len {self.encoder.max_len} "
                              f"(CLS included)")
        for t in self.tasks:
            task_info(t)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mechanisms"] = [m.to_dict() for m in self.mechanisms]
        d["encoder"] = self.encoder.to_dict()
        d["tasks"], d["seq_lens"] = list(self.tasks), list(self.seq_lens)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        validate(d, "suite_config")
        d = dict(d)
        d.pop("$schema", None)
        d["mechanisms"] = tuple(AttentionSpec.from_dict(m) for m in d.get("mechanisms", ()))
        enc = dict(d.get("encoder", {}))
        enc.setdefault("attention", AttentionSpec.full().to_dict())
        d["encoder"] = EncoderConfig.from_dict(enc)
        for k in ("tasks", "seq_lens"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)


def _model_for(cfg: EncoderConfig, spec: AttentionSpec, task: str, seed: int) -> ModelParams:
    info = task_info(task)
    enc = replace(cfg, attention=spec, vocab_size=info.vocab_size, num_classes=info.num_classes,
                  head_kind=info.head_kind)
    return build_encoder(enc, Rng(seed))


def _train_step(params: ModelParams, opt: Adam, inputs, labels, lr: float, rng: Rng) -> ModelParams:
    loss, grads = loss_and_grads(params, inputs, labels, ForwardContext(rng=rng.child(), train=True))
    if not np.isfinite(loss.item()):
        raise TrainingError(f"non-finite loss {loss.item()}")
    new = opt.step({n: params[n].data for n in params.names}, {n: g.data for n, g in grads.items()}, lr)
    return params.replace({n: Tensor.wrap(a) for n, a in new.items()})


def measure_throughput(params: ModelParams, seq_len: int, batch: int = 8, warmup: int = 10, steps: int = 50,
                       seed: int = 0, task: str | None = None, lr: float = 1e-4, estimator: str = "median") -> float:
    """Full train steps per second on random tokens, timed with a monotonic clock.

    Every measured step is timed on its own. ``estimator="median"`` returns
    1 / median step time, which shrugs off bursts of contention on a shared
    CPU; ``"window"`` returns steps / total elapsed time.
    """
    if steps < 1:
        raise ConfigError(f"measured steps must be >= 1, got {steps}")
    if warmup < 0:
        raise ConfigError(f"warmup must be >= 0, got {warmup}")
    if estimator not in ESTIMATORS:
        raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    info = task_info(task) if task else _infer_task(params)
    rng = Rng(seed)
    inputs, labels = random_batch(info, batch, seq_len, rng)
    opt = Adam()
    label = params.config.attention.label
    times = np.empty(steps)
    try:
        for _ in range(warmup):
            params = _train_step(params, opt, inputs, labels, lr, rng)
        gc.collect()  # start the window without a pending collection
        for i in range(steps):
            t0 = time.perf_counter()
            params = _train_step(params, opt, inputs, labels, lr, rng)
            times[i] = time.perf_counter() - t0
    except ArenaError as exc:
        raise TrainingError(f"{label} at N={seq_len}: {exc}") from exc
    if estimator == "median":
        return float(1.0 / np.median(times))
    return float(steps / times.sum())


def measure_memory(params: ModelParams, seq_len: int, batch: int = 8, seed: int = 0, task: str | None = None) -> int:
    """Peak live tensor bytes over one forward + backward (parameters are live outside)."""
    info = task_info(task) if task else _infer_task(params)
    rng = Rng(seed)
    inputs, labels = random_batch(info, batch, seq_len, rng)

    def step():
        loss, grads = loss_and_grads(params, inputs, labels, ForwardContext(rng=rng.child(), train=True))
        return float(loss.item())

    label = params.config.attention.label
    try:
        _, peak = measure_scope(step)
    except ArenaError as exc:
        raise TrainingError(f"{label} at N={seq_len}: {exc}") from exc
    return int(peak)


def _infer_task(params: ModelParams):
    c = params.config
    return TaskInfo("custom", c.vocab_size, c.num_classes, c.head_kind)


def attention_op_peak(spec: AttentionSpec, n: int, d: int = 16, seed: int = 0) -> int | None:
    """Peak bytes of one attention forward (no tape) on (N, d) inputs, or None when
    the mechanism is not one of the memory-scaling references (full, linformer, kernel)."""
    r = Rng(seed)
    q, k, v = (Tensor(r.normal(size=(n, d))) for _ in range(3))
    if spec.kind == "full":
        fn = lambda: full_attention(q, k, v).output
    elif spec.kind == "linformer":
        e = Tensor(r.normal(size=(spec.rank, n), scale=1.0 / np.sqrt(n)))
        fn = lambda: linformer_attention(q, k, v, e).output
    elif spec.kind == "kernel":
        w = orthogonal_gaussian(spec.num_features, d, r) if spec.feature_map == "favor_plus" else None
        fn = lambda: kernel_attention(q, k, v, spec.feature_map, projection=w).output
    else:
        return None
    with no_record():
        return int(measure_scope(fn)[1])


@dataclass
class BenchReport:
    rows: list[dict]
    metadata: dict
    speed_excluded: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    spans: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"schema_version": 1, "metadata": self.metadata, "rows": self.rows,
             "speed_excluded": self.speed_excluded, "failures": self.failures}
        if self.spans:
            d["required_attention_span"] = self.spans
        return d

    @property
    def ok(self) -> bool:
        return not self.failures

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc = self.to_dict()
        validate(doc, "bench_report")
        paths = {"json": out / "report.json", "csv": out / "report.csv"}
        paths["json"].write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        write_csv(paths["csv"], self.rows, CSV_COLUMNS)
        tradeoff = [r for r in self.rows if r.get("accuracy") is not None]
        if tradeoff:
            paths["tradeoff"] = out / "tradeoff.csv"
            write_csv(paths["tradeoff"], tradeoff, TRADEOFF_COLUMNS)
        return paths


def write_csv(path, rows, columns) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if r.get(c) is None else r.get(c) for c in columns])
    return Path(path)


def hardware_note(extra: str = "") -> str:
    note = f"{platform.machine()} {platform.processor() or 'cpu'}, {os.cpu_count()} logical cores, " \
           f"python {platform.python_version()}, numpy {np.__version__}"
    return f"{note}; {extra}" if extra else note


def _accuracy_and_span(cfg: SuiteConfig, spec: AttentionSpec, task: str):
    enc = replace(cfg.encoder, max_len=max(cfg.encoder.max_len, cfg.train_len + 1))
    params = _model_for(enc, spec, task, cfg.seed)
    data = synthetic_task_data(task, cfg.train_examples + cfg.eval_examples, cfg.train_len, cfg.seed)
    tr, ev = data[:cfg.train_examples], data[cfg.train_examples:]
    tc = TrainConfig(steps=cfg.train_steps, batch_size=min(cfg.batch_size, len(tr)), learning_rate=cfg.learning_rate,
                     warmup_steps=min(10, cfg.train_steps), seed=cfg.seed)
    params, _ = train(params, tc, tr)
    acc = evaluate(params, ev)
    span = None
    if cfg.span and spec.exposes_weights:
        span = required_span(params, ev, samples=len(ev))
    return acc, span


def run_suite(cfg: SuiteConfig) -> BenchReport:
    rows, excluded, failures, spans = [], [], [], {}
    for task in cfg.tasks:
        for spec in cfg.mechanisms:
            acc, span_val = None, None
            if cfg.train_steps > 0:
                try:
                    acc, span_rep = _accuracy_and_span(cfg, spec, task)
                    if span_rep is not None:
                        spans[f"{spec.label}/{task}"] = span_rep.to_dict()
                        span_val = span_rep.aggregate
                except ArenaError as exc:
                    failures.append({"mechanism": spec.label, "task": task, "seq_len": cfg.train_len,
                                     "stage": "train", "error": f"{exc.kind}: {exc}"})
            for n in cfg.seq_lens:
                if spec.speed_excluded:
                    excluded.append({"mechanism": spec.label, "task": task, "seq_len": n,
                                     "reason": "mask-emulated over full attention; excluded from speed ranking"})
                    continue
                try:
                    params = _model_for(cfg.encoder, spec, task, cfg.seed)
                    sps = measure_throughput(params, n, cfg.batch_size, cfg.warmup_steps, cfg.measured_steps,
                                             cfg.seed, task)
                    peak = measure_memory(params, n, cfg.batch_size, cfg.seed, task) if cfg.measure_memory else None
                    op_peak = attention_op_peak(spec, n, seed=cfg.seed) if cfg.measure_memory else None
                except ArenaError as exc:
                    failures.append({"mechanism": spec.label, "task": task, "seq_len": n, "stage": "bench",
                                     "error": f"{exc.kind}: {exc}"})
                    log.error("cell %s/%s/N=%d failed: %s", spec.label, task, n, exc)
                    continue
                rows.append({"mechanism": spec.label, "task": task, "seq_len": n, "batch_size": cfg.batch_size,
                             "steps_per_sec": sps, "peak_tensor_bytes": peak, "attention_op_peak_bytes": op_peak,
                             "relative_speedup_vs_full": None, "accuracy": acc, "span": span_val})
    full = {(r["task"], r["seq_len"]): r["steps_per_sec"] for r in rows if r["mechanism"] == "full"}
    for r in rows:
        base = full.get((r["task"], r["seq_len"]))
        if base:
            r["relative_speedup_vs_full"] = r["steps_per_sec"] / base
    meta = {
        "seed": cfg.seed,
        "config_hash": config_hash(cfg.to_dict()),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "hardware": hardware_note(cfg.hardware_note),
        "batch_size": cfg.batch_size,
        "warmup_steps": cfg.warmup_steps,
        "measured_steps": cfg.measured_steps,
        "throughput_unit": THROUGHPUT_UNIT,
        "memory_unit": "peak live tensor bytes from the substrate meter (not OS RSS)",
        "span_includes_cls": True,
        "span_normalized": False,
        "mechanism_defaults": {"sparse_transformer_pattern": "strided", "synthesizer": "dense"},
        "note": "desk-scale CPU run; absolute numbers are not comparable with accelerator benchmarks",
    }
    return BenchReport(rows, meta, excluded, failures, spans)


def check_contract(report: BenchReport):
    """Internal consistency: speedups match the ratio of measured rates."""
    full = {(r["task"], r["seq_len"]): r["steps_per_sec"] for r in report.rows if r["mechanism"] == "full"}
    for r in report.rows:
        base = full.get((r["task"], r["seq_len"]))
        exp = r["steps_per_sec"] / base if base else None
        got = r["relative_speedup_vs_full"]
        if (exp is None) != (got is None) or (exp is not None and abs(exp - got) > 1e-12 * max(1.0, exp)):
            raise ContractError(f"row {r['mechanism']}/{r['seq_len']}: inconsistent relative speedup")
