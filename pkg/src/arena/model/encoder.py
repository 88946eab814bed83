"""Pre-LN Transformer encoder with CLS readout and a two-tower matching head."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..attention import (
    cached_pattern, default_buckets, draw_rotations, full_attention, kernel_attention, linformer_attention,
    lsh_attention, orthogonal_gaussian, pattern_attention, sinkhorn_attention, synthesizer_attention,
)
from ..errors import ConfigError, LengthError
from ..substrate import Rng, Tensor, concat, detach, dropout, layer_norm, relu, take
from ..tokens import TokenBatch, TokenSequence
from .config import EncoderConfig


@dataclass
class ModelParams:
    config: EncoderConfig
    tensors: dict[str, Tensor]
    meta: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    @property
    def names(self) -> list[str]:
        return list(self.tensors)

    def count(self) -> int:
        return sum(t.size for t in self.tensors.values())

    def replace(self, tensors: dict[str, Tensor]) -> "ModelParams":
        """New params with ``tensors`` swapped in; names not given are kept."""
        unknown = set(tensors) - set(self.tensors)
        if unknown:
            raise KeyError(f"unknown parameter names: {sorted(unknown)}")
        return ModelParams(self.config, {**self.tensors, **tensors}, dict(self.meta))

    @property
    def seed(self) -> int:
        return int(self.meta.get("seed", 0))


def attention_param_shapes(cfg: EncoderConfig) -> dict[str, tuple]:
    """Per-layer attention parameters for the configured mechanism."""
    a, d, h, dh, L = cfg.attention, cfg.model_dim, cfg.heads, cfg.head_dim, cfg.max_len
    s: dict[str, tuple] = {}
    if a.kind == "lsh":
        s.update(wqk=(d, d), bqk=(d,), wv=(d, d), bv=(d,))
    elif a.kind == "synthesizer":
        if a.synth_kind == "dense":
            s.update(wq=(d, d), bq=(d,), syn_w1=(h, dh, dh), syn_b1=(h, 1, dh), syn_w2=(h, dh, L),
                     syn_b2=(h, 1, L))
        else:
            s.update(syn_r=(L, L))
        s.update(wv=(d, d), bv=(d,))
    else:
        s.update(wq=(d, d), bq=(d,), wk=(d, d), bk=(d,), wv=(d, d), bv=(d,))
    if a.kind == "linformer":
        s["proj_e"] = (a.rank, L)
        if not a.shared_kv:
            s["proj_f"] = (a.rank, L)
    s.update(wo=(d, d), bo=(d,))
    return s


def param_shapes(cfg: EncoderConfig) -> dict[str, tuple]:
    d, f = cfg.model_dim, cfg.ffn_dim
    s = {"embed": (cfg.vocab_size + 2, d), "pos": (cfg.max_len, d)}
    for i in range(cfg.layers):
        p = f"layer{i}."
        s[p + "ln1_g"], s[p + "ln1_b"] = (d,), (d,)
        s.update({p + k: v for k, v in attention_param_shapes(cfg).items()})
        s[p + "ln2_g"], s[p + "ln2_b"] = (d,), (d,)
        s[p + "ff_w1"], s[p + "ff_b1"] = (d, f), (f,)
        s[p + "ff_w2"], s[p + "ff_b2"] = (f, d), (d,)
    s["lnf_g"], s["lnf_b"] = (d,), (d,)
    width = 4 * d if cfg.head_kind == "match" else d
    s["head_w1"], s["head_b1"] = (width, d), (d,)
    s["head_w2"], s["head_b2"] = (d, cfg.num_classes), (cfg.num_classes,)
    return s


def _init_value(name: str, shape: tuple, cfg: EncoderConfig, rng: Rng) -> np.ndarray:
    leaf = name.split(".")[-1]
    if leaf.endswith("_g"):
        return np.ones(shape)
    if leaf.startswith("b") or "_b" in leaf:
        return np.zeros(shape)
    if leaf.startswith("proj_"):
        # a sum over up to max_len keys; keep the projected rows at unit scale
        return rng.normal(size=shape, scale=1.0 / math.sqrt(shape[1]))
    return rng.normal(size=shape, scale=1.0 / math.sqrt(cfg.model_dim))


def build_encoder(config: EncoderConfig, rng: Rng | int = 0) -> ModelParams:
    """Deterministic scaled-normal initialization (sigma = 1/sqrt(model_dim)).

    Each parameter draws from its own stream keyed by its name, so two
    configs that differ only in attention share every non-attention tensor.
    """
    if not isinstance(config, EncoderConfig):
        raise ConfigError("build_encoder expects an EncoderConfig")
    rng = rng if isinstance(rng, Rng) else Rng(int(rng))
    seed = rng.seed_int()
    tensors = {}
    for name, shape in param_shapes(config).items():
        stream = Rng(np.random.SeedSequence([seed, hash_str(name)]))
        tensors[name] = Tensor(_init_value(name, shape, config, stream))
    return ModelParams(config, tensors, {"seed": seed})


def hash_str(s: str) -> int:
    """FNV-1a, truncated to 48 bits; stable across processes unlike hash()."""
    h = 1469598103934665603
    for ch in s.encode():
        h = ((h ^ ch) * 1099511628211) & 0xFFFFFFFFFFFF
    return h


# ---------------------------------------------------------------- forward

@dataclass
class ForwardContext:
    """Per-call state: stochastic draws (dropout, FAVOR+/LSH redraws) and captures."""

    rng: Rng | None = None
    train: bool = False
    capture: list | None = None


def _fixed_stream(params: ModelParams, layer: int, what: str) -> Rng:
    return Rng(np.random.SeedSequence([params.seed, layer, hash_str(what)]))


def _split_heads(t: Tensor, b: int, n: int, h: int) -> Tensor:
    return t.reshape(b, n, h, -1).swapaxes(1, 2)


def _merge_heads(t: Tensor, b: int, n: int) -> Tensor:
    return t.swapaxes(1, 2).reshape(b, n, -1)


def _attention(params: ModelParams, i: int, x: Tensor, mask: np.ndarray, ctx: ForwardContext) -> Tensor:
    cfg = params.config
    a = cfg.attention
    p = lambda k: params[f"layer{i}.{k}"]
    b, n, _ = x.shape
    h = cfg.heads
    km = mask[:, None, :]  # broadcast over heads

    def proj(w, bias):
        return _split_heads(x @ p(w) + p(bias), b, n, h)

    weights = None
    if a.kind == "lsh":
        qk, v = proj("wqk", "bqk"), proj("wv", "bv")
        nb = default_buckets(cfg.max_len, a.bucket_size)
        stream = ctx.rng.child() if ctx.rng is not None else _fixed_stream(params, i, "lsh")
        rot = draw_rotations(a.hash_rounds, cfg.head_dim, nb, stream)
        out = lsh_attention(qk, v, a.hash_rounds, a.bucket_size, exclude_self=a.exclude_self,
                            key_mask=km, rotations=rot).output
    elif a.kind == "synthesizer":
        v = proj("wv", "bv")
        if a.synth_kind == "dense":
            sp = {"w1": p("syn_w1"), "b1": p("syn_b1"), "w2": p("syn_w2"), "b2": p("syn_b2")}
            res = synthesizer_attention(proj("wq", "bq"), v, "dense", sp, key_mask=km)
        else:
            r = p("syn_r")
            if a.freeze:
                r = detach(r)
            res = synthesizer_attention(x, v, "random", {"r": r}, key_mask=km)
        out, weights = res.output, res.weights
    else:
        q, k, v = proj("wq", "bq"), proj("wk", "bk"), proj("wv", "bv")
        if a.kind == "full":
            res = full_attention(q, k, v, km)
            out, weights = res.output, res.weights
        elif a.kind == "pattern":
            pat = cached_pattern(a.pattern_kind, cfg.max_len, a.window, a.stride, a.num_global, a.num_random,
                                 params.seed).truncate(n)
            res = pattern_attention(q, k, v, pat, km)
            out, weights = res.output, res.weights
        elif a.kind == "linformer":
            f = p("proj_f") if f"layer{i}.proj_f" in params else None
            out = linformer_attention(q, k, v, p("proj_e"), f, key_mask=km).output
        elif a.kind == "kernel":
            w = None
            if a.feature_map == "favor_plus":
                redraw = a.redraw and ctx.rng is not None
                stream = ctx.rng.child() if redraw else _fixed_stream(params, i, "favor")
                w = orthogonal_gaussian(a.num_features, cfg.head_dim, stream)
            out = kernel_attention(q, k, v, a.feature_map, projection=w, key_mask=km).output
        elif a.kind == "sinkhorn":
            out = sinkhorn_attention(q, k, v, a.block_size, a.sinkhorn_iters, key_mask=km).output
        else:
            raise ConfigError(f"unsupported attention kind {a.kind!r}")
    if ctx.capture is not None:
        ctx.capture.append(weights)
    return _merge_heads(out, b, n) @ p("wo") + p("bo")


def _as_batch(tokens) -> TokenBatch:
    if isinstance(tokens, TokenBatch):
        return tokens
    if isinstance(tokens, TokenSequence):
        return TokenBatch.stack([tokens])
    return TokenBatch.stack(list(tokens))


def encode(params: ModelParams, tokens, ctx: ForwardContext | None = None) -> Tensor:
    """Final-layer CLS features, shape (B, model_dim)."""
    cfg = params.config
    ctx = ctx or ForwardContext()
    batch = _as_batch(tokens)
    if int(batch.lengths.max(initial=0)) > cfg.max_tokens:
        raise LengthError(f"input of {int(batch.lengths.max())} tokens exceeds the model limit "
                          f"{cfg.max_tokens} (max_len {cfg.max_len} includes CLS); truncate it first")
    ids = batch.ids
    if ids.size and (ids.min() < 0 or ids[batch.pad_mask].max(initial=0) >= cfg.vocab_size):
        raise ConfigError(f"token ids must lie in [0, {cfg.vocab_size})")
    b = ids.shape[0]
    valid = batch.pad_mask
    full_ids = np.concatenate([np.full((b, 1), cfg.cls_id), np.where(valid, ids, cfg.pad_id)], axis=1)
    mask = np.concatenate([np.ones((b, 1), bool), valid], axis=1)
    n = full_ids.shape[1]
    x = take(params["embed"], full_ids) + params["pos"][:n]
    rate = cfg.dropout if ctx.train else 0.0
    for i in range(cfg.layers):
        pre = f"layer{i}."
        hidden = layer_norm(x, params[pre + "ln1_g"], params[pre + "ln1_b"])
        x = x + dropout(_attention(params, i, hidden, mask, ctx), rate, ctx.rng)
        hidden = layer_norm(x, params[pre + "ln2_g"], params[pre + "ln2_b"])
        ff = relu(hidden @ params[pre + "ff_w1"] + params[pre + "ff_b1"]) @ params[pre + "ff_w2"]
        x = x + dropout(ff + params[pre + "ff_b2"], rate, ctx.rng)
    x = layer_norm(x, params["lnf_g"], params["lnf_b"])
    return x[:, 0, :]


def mlp_head(params: ModelParams, features: Tensor) -> Tensor:
    hidden = relu(features @ params["head_w1"] + params["head_b1"])
    return hidden @ params["head_w2"] + params["head_b2"]


def match_features(x1: Tensor, x2: Tensor) -> Tensor:
    """[X1, X2, X1 * X2, X1 - X2] along the feature axis."""
    return concat([x1, x2, x1 * x2, x1 - x2], axis=-1)


def forward_classify(params: ModelParams, tokens, ctx: ForwardContext | None = None) -> Tensor:
    if params.config.head_kind != "classify":
        raise ConfigError("this model has a match head; use forward_match")
    return mlp_head(params, encode(params, tokens, ctx))


def forward_match(params: ModelParams, doc1, doc2, ctx: ForwardContext | None = None) -> Tensor:
    """Shared-weight towers; both documents run through the same encoder."""
    if params.config.head_kind != "match":
        raise ConfigError("this model has a classify head; use forward_classify")
    return mlp_head(params, match_features(encode(params, doc1, ctx), encode(params, doc2, ctx)))


def capture_weights(params: ModelParams, tokens) -> list:
    """Per-layer attention weights (B, H, N, N), or None where the mechanism hides them."""
    ctx = ForwardContext(capture=[])
    encode(params, tokens, ctx)
    return ctx.capture
