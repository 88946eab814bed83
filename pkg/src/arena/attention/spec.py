"""Attention mechanism descriptors (JSON round-trippable)."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError

KINDS = ("full", "pattern", "linformer", "kernel", "lsh", "sinkhorn", "synthesizer")
PATTERN_KINDS = ("local", "strided", "fixed", "longformer", "bigbird")
FEATURE_MAPS = ("elu1", "favor_plus")
SYNTH_KINDS = ("dense", "random")

# parameters each kind must carry; everything else must stay unset
_REQUIRED = {
    "full": (),
    "pattern": ("pattern_kind", "window"),
    "linformer": ("rank", "shared_kv"),
    "kernel": ("feature_map",),
    "lsh": ("hash_rounds", "bucket_size", "exclude_self"),
    "sinkhorn": ("block_size", "sinkhorn_iters"),
    "synthesizer": ("synth_kind",),
}
_PATTERN_EXTRA = {
    "local": (),
    "strided": ("stride",),
    "fixed": ("stride",),
    "longformer": ("num_global",),
    "bigbird": ("num_global", "num_random"),
}
_OPTIONAL = {
    "kernel": ("num_features", "redraw"),
    "synthesizer": ("freeze",),
}
_COUNTS = ("window", "stride", "num_global", "num_random", "rank", "num_features",
           "hash_rounds", "bucket_size", "block_size", "sinkhorn_iters")


@dataclass(frozen=True)
class AttentionSpec:
    kind: str = "full"
    window: int | None = None
    pattern_kind: str | None = None
    stride: int | None = None
    num_global: int | None = None
    num_random: int | None = None
    rank: int | None = None
    shared_kv: bool | None = None
    feature_map: str | None = None
    num_features: int | None = None
    redraw: bool | None = None
    hash_rounds: int | None = None
    bucket_size: int | None = None
    exclude_self: bool | None = None
    block_size: int | None = None
    sinkhorn_iters: int | None = None
    synth_kind: str | None = None
    freeze: bool | None = None

    def __post_init__(self):
        self.validate()

    # -- constructors with the documented defaults --
    @classmethod
    def full(cls):
        return cls("full")

    @classmethod
    def pattern(cls, pattern_kind="local", window=32, stride=None, num_global=None, num_random=None):
        if pattern_kind in ("strided", "fixed") and stride is None:
            stride = window
        if pattern_kind in ("longformer", "bigbird") and num_global is None:
            num_global = 1
        if pattern_kind == "bigbird" and num_random is None:
            num_random = 3
        return cls("pattern", pattern_kind=pattern_kind, window=window, stride=stride,
                   num_global=num_global, num_random=num_random)

    @classmethod
    def linformer(cls, rank=64, shared_kv=True):
        return cls("linformer", rank=rank, shared_kv=shared_kv)

    @classmethod
    def kernel(cls, feature_map="elu1", num_features=None, redraw=None):
        if feature_map == "favor_plus":
            num_features = 256 if num_features is None else num_features
            redraw = True if redraw is None else redraw
        return cls("kernel", feature_map=feature_map, num_features=num_features, redraw=redraw)

    @classmethod
    def lsh(cls, hash_rounds=2, bucket_size=32, exclude_self=True):
        return cls("lsh", hash_rounds=hash_rounds, bucket_size=bucket_size, exclude_self=exclude_self)

    @classmethod
    def sinkhorn(cls, block_size=32, sinkhorn_iters=8):
        return cls("sinkhorn", block_size=block_size, sinkhorn_iters=sinkhorn_iters)

    @classmethod
    def synthesizer(cls, synth_kind="dense", freeze=None):
        return cls("synthesizer", synth_kind=synth_kind, freeze=freeze)

    # -- validation --
    def required(self) -> tuple[str, ...]:
        req = _REQUIRED[self.kind]
        if self.kind == "pattern" and self.pattern_kind in _PATTERN_EXTRA:
            req = req + _PATTERN_EXTRA[self.pattern_kind]
        return req

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown attention kind {self.kind!r}; expected one of {KINDS}")
        allowed = set(self.required()) | set(_OPTIONAL.get(self.kind, ()))
        for f in fields(self):
            if f.name == "kind":
                continue
            v = getattr(self, f.name)
            if f.name in self.required() and v is None:
                raise ConfigError(f"attention kind {self.kind!r} requires {f.name!r}")
            if f.name not in allowed and v is not None:
                raise ConfigError(f"{f.name!r} does not apply to attention kind {self.kind!r}")
            if f.name in _COUNTS and v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"{f.name} must be a positive integer, got {v!r}")
        if self.kind == "pattern" and self.pattern_kind not in PATTERN_KINDS:
            raise ConfigError(f"unknown pattern_kind {self.pattern_kind!r}")
        if self.kind == "kernel":
            if self.feature_map not in FEATURE_MAPS:
                raise ConfigError(f"unknown feature_map {self.feature_map!r}")
            if self.feature_map == "favor_plus" and self.num_features is None:
                raise ConfigError("favor_plus requires num_features")
            if self.feature_map == "elu1" and (self.num_features is not None or self.redraw is not None):
                raise ConfigError("elu1 takes no num_features/redraw")
        if self.kind == "synthesizer" and self.synth_kind not in SYNTH_KINDS:
            raise ConfigError(f"unknown synth_kind {self.synth_kind!r}")

    def check_length(self, max_len: int):
        if self.window is not None and self.window > max_len:
            raise ConfigError(f"window {self.window} exceeds max length {max_len}")

    # -- properties used by the harness and metrics --
    @property
    def exposes_weights(self) -> bool:
        return self.kind in ("full", "pattern", "synthesizer")

    @property
    def mask_emulated(self) -> bool:
        return self.kind == "pattern"

    @property
    def speed_excluded(self) -> bool:
        # Sparse Transformer and Longformer only exist here as masks over full attention
        return self.kind == "pattern" and self.pattern_kind in ("strided", "fixed", "longformer")

    @property
    def label(self) -> str:
        if self.kind == "pattern":
            return f"pattern-{self.pattern_kind}"
        if self.kind == "kernel":
            return f"kernel-{self.feature_map}"
        if self.kind == "synthesizer":
            return f"synthesizer-{self.synth_kind}"
        return self.kind

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @classmethod
    def from_dict(cls, d: dict) -> "AttentionSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown AttentionSpec fields: {sorted(unknown)}")
        return cls(**d)
