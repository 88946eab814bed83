"""Encoder and training configurations, plus the shipped presets."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace

from ..attention import AttentionSpec
from ..errors import ConfigError

HEAD_KINDS = ("classify", "match")


@dataclass(frozen=True)
class EncoderConfig:
    """``vocab_size`` counts content tokens; PAD and CLS are appended as ids
    ``vocab_size`` and ``vocab_size + 1``. ``max_len`` includes the CLS slot."""

    layers: int = 2
    heads: int = 2
    model_dim: int = 64
    ffn_dim: int = 128
    max_len: int = 129
    vocab_size: int = 256
    attention: AttentionSpec = field(default_factory=AttentionSpec.full)
    head_kind: str = "classify"
    num_classes: int = 2
    dropout: float = 0.0

    def __post_init__(self):
        if isinstance(self.attention, dict):
            object.__setattr__(self, "attention", AttentionSpec.from_dict(self.attention))
        for name in ("layers", "heads", "model_dim", "ffn_dim", "max_len", "vocab_size", "num_classes"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.max_len < 2:
            raise ConfigError("max_len must leave room for CLS plus one token")
        if self.model_dim % self.heads:
            raise ConfigError(f"model_dim {self.model_dim} is not divisible by heads {self.heads}")
        if self.head_kind not in HEAD_KINDS:
            raise ConfigError(f"head_kind must be one of {HEAD_KINDS}, got {self.head_kind!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        self.attention.check_length(self.max_len)

    @property
    def head_dim(self) -> int:
        return self.model_dim // self.heads

    @property
    def pad_id(self) -> int:
        return self.vocab_size

    @property
    def cls_id(self) -> int:
        return self.vocab_size + 1

    @property
    def max_tokens(self) -> int:
        """Longest input accepted (CLS takes one position)."""
        return self.max_len - 1

    def with_attention(self, spec: AttentionSpec) -> "EncoderConfig":
        return replace(self, attention=spec)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["attention"] = self.attention.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        return cls(**_known(cls, d))


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 100
    batch_size: int = 8
    learning_rate: float = 1e-3
    warmup_steps: int = 10
    weight_decay: float = 0.0
    seed: int = 0
    eval_every: int = 0

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0 <= self.warmup_steps <= max(self.steps, 0):
            raise ConfigError(f"warmup_steps must be in [0, steps], got {self.warmup_steps}")
        if self.learning_rate < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate and weight_decay must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**_known(cls, d))


def _known(cls, d: dict) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return dict(d)


# Full-scale settings for the five tasks. Image and
# Pathfinder runs are specified in epochs (200); steps is left at 0 for those.
# ListOps lr and batch and the warmup length are our own choices:
# warmup is a tenth of the steps, ListOps uses lr 1e-3 and batch 32.
FULL_PRESETS = {
    "listops": dict(
        encoder=EncoderConfig(layers=6, heads=8, model_dim=512, ffn_dim=2048, max_len=2001, vocab_size=15,
                              num_classes=10),
        train=TrainConfig(steps=5000, batch_size=32, learning_rate=1e-3, warmup_steps=500),
    ),
    "text": dict(
        encoder=EncoderConfig(layers=6, heads=8, model_dim=512, ffn_dim=2048, max_len=4001, vocab_size=256,
                              num_classes=2),
        train=TrainConfig(steps=20000, batch_size=32, learning_rate=0.05, warmup_steps=2000, weight_decay=0.1),
    ),
    "matching": dict(
        encoder=EncoderConfig(layers=4, heads=4, model_dim=128, ffn_dim=512, max_len=4001, vocab_size=256,
                              head_kind="match", num_classes=2),
        train=TrainConfig(steps=5000, batch_size=32, learning_rate=0.5, warmup_steps=500),
    ),
    "image": dict(
        encoder=EncoderConfig(layers=3, heads=4, model_dim=64, ffn_dim=128, max_len=1025, vocab_size=256,
                              num_classes=10),
        train=TrainConfig(steps=0, batch_size=32, learning_rate=0.01, warmup_steps=0),
        epochs=200,
    ),
    "pathfinder": dict(
        encoder=EncoderConfig(layers=4, heads=8, model_dim=128, ffn_dim=128, max_len=1025, vocab_size=256,
                              num_classes=2),
        train=TrainConfig(steps=0, batch_size=32, learning_rate=0.01, warmup_steps=0),
        epochs=200,
    ),
}

# Desk-scale shrinkage of the above: same shape of model, CPU-sized.
DESK_PRESETS = {
    "listops": dict(
        encoder=EncoderConfig(layers=2, heads=2, model_dim=64, ffn_dim=128, max_len=129, vocab_size=15,
                              num_classes=10),
        train=TrainConfig(steps=1500, batch_size=32, learning_rate=1e-3, warmup_steps=100),
    ),
    "text": dict(
        encoder=EncoderConfig(layers=2, heads=2, model_dim=64, ffn_dim=128, max_len=513, vocab_size=256,
                              num_classes=2),
        train=TrainConfig(steps=500, batch_size=16, learning_rate=1e-3, warmup_steps=50, weight_decay=0.01),
    ),
    "matching": dict(
        encoder=EncoderConfig(layers=2, heads=2, model_dim=32, ffn_dim=64, max_len=257, vocab_size=256,
                              head_kind="match", num_classes=2),
        train=TrainConfig(steps=500, batch_size=16, learning_rate=1e-3, warmup_steps=50),
    ),
    "image": dict(
        encoder=EncoderConfig(layers=1, heads=2, model_dim=32, ffn_dim=64, max_len=1025, vocab_size=256,
                              num_classes=10),
        train=TrainConfig(steps=300, batch_size=16, learning_rate=1e-3, warmup_steps=30),
    ),
    "pathfinder": dict(
        encoder=EncoderConfig(layers=1, heads=2, model_dim=32, ffn_dim=32, max_len=1025, vocab_size=256,
                              num_classes=2),
        train=TrainConfig(steps=300, batch_size=16, learning_rate=1e-3, warmup_steps=30),
    ),
}
