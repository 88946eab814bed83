"""Token sequences and padded batches shared by the tasks, loaders, and model."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TokenSequence:
    """Integer ids with a true length; positions at or past ``length`` are padding."""

    ids: np.ndarray
    length: int

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int32)
        if ids.ndim != 1:
            raise DimensionError(f"token ids must be 1-D, got shape {ids.shape}")
        if not 0 <= self.length <= ids.shape[0]:
            raise DimensionError(f"length {self.length} outside [0, {ids.shape[0]}]")
        object.__setattr__(self, "ids", ids)

    @classmethod
    def of(cls, ids) -> "TokenSequence":
        ids = np.asarray(ids, dtype=np.int32)
        return cls(ids, int(ids.shape[0]))

    @property
    def pad_mask(self) -> np.ndarray:
        """True at real tokens."""
        return np.arange(self.ids.shape[0]) < self.length

    @property
    def tokens(self) -> np.ndarray:
        return self.ids[:self.length]

    def truncate(self, max_len: int, what: str = "sequence") -> "TokenSequence":
        if self.length <= max_len:
            return self
        log.warning("truncating %s from %d to %d tokens", what, self.length, max_len)
        return TokenSequence(self.ids[:max_len], max_len)

    def __len__(self) -> int:
        return self.length


@dataclass(frozen=True)
class TokenBatch:
    ids: np.ndarray      # (B, L) int; padding content is ignored
    lengths: np.ndarray  # (B,)

    @classmethod
    def stack(cls, seqs, pad_to: int | None = None) -> "TokenBatch":
        seqs = [s if isinstance(s, TokenSequence) else TokenSequence.of(s) for s in seqs]
        width = max([s.length for s in seqs] + [pad_to or 0])
        ids = np.zeros((len(seqs), width), dtype=np.int32)
        for i, s in enumerate(seqs):
            ids[i, :s.length] = s.tokens
        return cls(ids, np.array([s.length for s in seqs], dtype=np.int64))

    @property
    def pad_mask(self) -> np.ndarray:
        return np.arange(self.ids.shape[1])[None, :] < self.lengths[:, None]

    def __len__(self) -> int:
        return self.ids.shape[0]
