"""Required attention span, accuracy, and approximation error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DimensionError, UnsupportedMechanismError
from .substrate import Rng, Tensor


def _array(x) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


def attention_span(weights, exclude_cls: bool = False, normalize: bool = False, atol: float = 1e-5) -> float:
    """(1/N) sum_i sum_j w_ij |i - j| for one row-stochastic N x N matrix.

    ``exclude_cls`` drops query and key position 0 and renormalizes the
    remaining rows; ``normalize`` divides the result by N.
    """
    w = np.asarray(_array(weights), dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
        raise DimensionError(f"span needs a square N x N matrix, got {list(w.shape)}")
    if (w < -atol).any() or np.abs(w.sum(-1) - 1.0).max() > atol:
        raise ContractError("attention rows must be nonnegative and sum to 1")
    if exclude_cls:
        if w.shape[0] < 2:
            raise DimensionError("excluding CLS leaves no positions")
        w = w[1:, 1:]
        mass = w.sum(-1, keepdims=True)
        if (mass <= 0).any():
            raise ContractError("a query puts all its mass on CLS; span without CLS is undefined")
        w = w / mass
    n = w.shape[0]
    idx = np.arange(n)
    span = float((w * np.abs(idx[:, None] - idx[None, :])).sum() / n)
    return span / n if normalize else span


def uniform_span(n: int) -> float:
    """Closed form for all-uniform attention: (N^2 - 1) / (3N)."""
    return (n * n - 1) / (3 * n)


@dataclass
class SpanReport:
    per_head: np.ndarray   # (layers, heads) mean span over samples
    aggregate: float
    samples: int
    exclude_cls: bool = False
    normalized: bool = False

    def to_dict(self) -> dict:
        return {"per_layer_head": self.per_head.tolist(), "aggregate": self.aggregate, "samples": self.samples,
                "includes_cls": not self.exclude_cls, "normalized": self.normalized}


def required_span(params, examples, samples: int = 1000, batch_size: int = 16, exclude_cls: bool = False,
                  normalize: bool = False, rng: Rng | None = None) -> SpanReport:
    """Mean span over every layer and head, averaged over up to ``samples`` examples."""
    from .model.encoder import capture_weights
    from .tokens import TokenBatch

    spec = params.config.attention
    if not spec.exposes_weights:
        raise UnsupportedMechanismError(f"{spec.label} attention never forms explicit weights; span is undefined")
    if len(examples) == 0:
        raise ContractError("span needs at least one example")
    idx = np.arange(len(examples))
    if len(examples) > samples:
        idx = np.sort((rng or Rng(0)).choice(len(examples), size=samples, replace=False))
    total = np.zeros((params.config.layers, params.config.heads))
    for s in range(0, len(idx), batch_size):
        chunk = [examples[int(i)] for i in idx[s:s + batch_size]]
        # matching examples hold document pairs; the span is measured on the first tower input
        seqs = [x[0][0] if isinstance(x[0], tuple) else x[0] for x in chunk]
        batch = TokenBatch.stack(seqs)
        layers = capture_weights(params, batch)
        for li, w in enumerate(layers):
            wd = w.data
            for b, length in enumerate(batch.lengths):
                n = int(length) + 1  # CLS
                for h in range(wd.shape[1]):
                    total[li, h] += attention_span(wd[b, h, :n, :n], exclude_cls, normalize)
    per_head = total / len(idx)
    return SpanReport(per_head, float(per_head.mean()), int(len(idx)), exclude_cls, normalize)


def accuracy(logits, labels) -> float:
    """Argmax match rate; np.argmax breaks ties toward the lowest class index."""
    x = _array(logits)
    y = np.asarray(labels)
    if y.size == 0:
        raise ContractError("accuracy of an empty batch is undefined")
    pred = np.argmax(x, axis=-1) if x.ndim == 2 else x
    if pred.shape != y.shape:
        raise DimensionError(f"predictions {list(pred.shape)} and labels {list(y.shape)} differ")
    return float((pred == y).mean())


def approx_error(output, exact) -> tuple[float, float]:
    a = np.asarray(_array(output), dtype=np.float64)
    b = np.asarray(_array(exact), dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionError(f"approximation {list(a.shape)} and exact {list(b.shape)} differ")
    diff = np.abs(a - b)
    return (float(diff.max()), float(diff.mean())) if diff.size else (0.0, 0.0)


def favor_error_sweep(ms=(16, 64, 256, 512, 1024), seeds: int = 20, n: int = 64, d: int = 32,
                      data_seed: int = 0) -> dict[int, float]:
    """Median over seeds of mean_abs(FAVOR+ output - exact softmax attention).

    Inputs are unit-normalized rows; each seed draws fresh data and a fresh
    projection, and the same data is reused across every m for a given seed.
    """
    from .attention import full_attention, kernel_attention, orthogonal_gaussian

    out = {m: [] for m in ms}
    for s in range(seeds):
        r = Rng(np.random.SeedSequence([data_seed, s]))
        q, k = (x / np.linalg.norm(x, axis=1, keepdims=True) for x in (r.normal(size=(n, d)) for _ in range(2)))
        v = r.normal(size=(n, d))
        qt, kt, vt = Tensor(q), Tensor(k), Tensor(v)
        exact = full_attention(qt, kt, vt).output
        for m in ms:
            w = orthogonal_gaussian(m, d, Rng(np.random.SeedSequence([data_seed, s, m])))
            approx = kernel_attention(qt, kt, vt, "favor_plus", projection=w).output
            out[m].append(approx_error(approx, exact)[1])
    return {m: float(np.median(v)) for m, v in out.items()}
