"""Adam with linear warmup and decoupled weight decay; desk-scale trainer."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import TrainingError
from ..substrate import Rng, Tape, Tensor, cross_entropy, grad
from ..tokens import TokenBatch
from .config import TrainConfig
from .encoder import ForwardContext, ModelParams, forward_classify, forward_match

log = logging.getLogger(__name__)


def warmup_lr(step: int, cfg: TrainConfig) -> float:
    """Linear from 0 to learning_rate over warmup_steps (1-based step), then flat."""
    if cfg.warmup_steps == 0:
        return cfg.learning_rate
    return cfg.learning_rate * min(1.0, step / cfg.warmup_steps)


@dataclass
class Adam:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float) -> dict:
        self.t += 1
        out = {}
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in params.items():
            g = grads[name]
            m = self.m.get(name, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(name, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            upd = lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay and p.ndim >= 2:
                upd = upd + lr * self.weight_decay * p
            out[name] = (p - upd).astype(p.dtype)
        return out


@dataclass
class History:
    steps: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    eval_steps: list = field(default_factory=list)
    eval_accuracy: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"steps": self.steps, "loss": self.loss, "lr": self.lr,
                "eval_steps": self.eval_steps, "eval_accuracy": self.eval_accuracy}


def _batch_of(examples, idx):
    """Classification examples are (TokenSequence, label); matching are ((doc1, doc2), label)."""
    xs = [examples[i][0] for i in idx]
    labels = np.array([examples[i][1] for i in idx], dtype=np.int64)
    if isinstance(xs[0], tuple):
        return (TokenBatch.stack([x[0] for x in xs]), TokenBatch.stack([x[1] for x in xs])), labels
    return TokenBatch.stack(xs), labels


def logits_for(params: ModelParams, inputs, ctx: ForwardContext | None = None) -> Tensor:
    if params.config.head_kind == "match":
        return forward_match(params, inputs[0], inputs[1], ctx)
    return forward_classify(params, inputs, ctx)


def loss_and_grads(params: ModelParams, inputs, labels, ctx: ForwardContext | None = None):
    names = params.names
    with Tape() as tape:
        loss = cross_entropy(logits_for(params, inputs, ctx), labels)
    grads = grad(tape, loss, *[params[n] for n in names], allow_unused=True)
    return loss, dict(zip(names, grads))


def batch_order(n: int, batch_size: int, rng: Rng):
    """Endless epoch-shuffled index batches; a short tail batch wraps into the next epoch."""
    buf: list[int] = []
    while True:
        while len(buf) < batch_size:
            buf.extend(int(i) for i in rng.permutation(n))
        yield buf[:batch_size]
        buf = buf[batch_size:]


def evaluate(params: ModelParams, examples, batch_size: int = 32) -> float:
    from ..metrics import accuracy

    preds, gold = [], []
    for s in range(0, len(examples), batch_size):
        inputs, labels = _batch_of(examples, range(s, min(s + batch_size, len(examples))))
        preds.append(np.argmax(logits_for(params, inputs).data, axis=-1))
        gold.append(labels)
    return accuracy(np.concatenate(preds), np.concatenate(gold))


def train(params: ModelParams, cfg: TrainConfig, dataset, eval_set=None, callback=None):
    """Returns (params, History). ``dataset`` is a sequence of labelled examples."""
    if len(dataset) == 0:
        raise TrainingError("empty training set")
    rng = Rng(cfg.seed)
    order_rng, noise_rng = rng.split()
    order = batch_order(len(dataset), cfg.batch_size, order_rng)
    opt = Adam(weight_decay=cfg.weight_decay)
    hist = History()
    tensors = {n: params[n].data for n in params.names}
    for step in range(1, cfg.steps + 1):
        inputs, labels = _batch_of(dataset, next(order))
        ctx = ForwardContext(rng=noise_rng.child(), train=True)
        loss, grads = loss_and_grads(params, inputs, labels, ctx)
        value = float(loss.item())
        if not math.isfinite(value):
            raise TrainingError(f"non-finite loss {value} at step {step}")
        lr = warmup_lr(step, cfg)
        tensors = opt.step(tensors, {n: g.data for n, g in grads.items()}, lr)
        params = params.replace({n: Tensor.wrap(a) for n, a in tensors.items()})
        hist.steps.append(step)
        hist.loss.append(value)
        hist.lr.append(lr)
        if eval_set is not None and cfg.eval_every and (step % cfg.eval_every == 0 or step == cfg.steps):
            acc = evaluate(params, eval_set)
            hist.eval_steps.append(step)
            hist.eval_accuracy.append(acc)
            log.info("step %d loss %.4f eval acc %.4f", step, value, acc)
        if callback is not None:
            callback(step, value, params)
    return params, hist
