"""Exact softmax attention and its mask-emulated sparse variants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DimensionError, ParameterError
from ..substrate import Rng, Tensor, softmax
from .common import AttentionOutput, check_qkv, key_mask_array


def full_attention(q: Tensor, k: Tensor, v: Tensor, key_mask=None) -> AttentionOutput:
    """softmax(QK^T / sqrt(d)) V over all positions, with padded keys excluded."""
    check_qkv(q, k, v)
    km = key_mask_array(key_mask, k.shape[-2])
    logits = (q * (1.0 / math.sqrt(q.shape[-1]))) @ k.T
    w = softmax(logits, None if km is None else km[..., None, :])
    del logits
    return AttentionOutput(w @ v, w)


@dataclass(frozen=True)
class SparsityPattern:
    n: int
    allowed: np.ndarray  # (n, n) bool

    def __post_init__(self):
        if self.allowed.shape != (self.n, self.n):
            raise DimensionError(f"pattern mask shape {self.allowed.shape} != ({self.n}, {self.n})")

    def truncate(self, n: int) -> "SparsityPattern":
        if n > self.n:
            raise DimensionError(f"pattern built for {self.n} positions, asked for {n}")
        return SparsityPattern(n, self.allowed[:n, :n])

    @property
    def density(self) -> float:
        return float(self.allowed.mean())


def build_sparsity_pattern(pattern_kind: str, n: int, window: int = 1, stride: int | None = None,
                           num_global: int = 0, num_random: int = 0, rng: Rng | None = None
                           ) -> SparsityPattern:
    """Boolean attention mask for the fixed sparse families.

    local       |i - j| <= window
    strided     |i - j| <= window, or |i - j| a multiple of stride
    fixed       same stride-sized block, or one of the last min(window, stride)
                columns of any block
    longformer  local band plus ``num_global`` global rows and columns
    bigbird     longformer plus ``num_random`` seeded random keys per row
    The diagonal is always allowed.
    """
    if n < 1:
        raise ParameterError(f"sequence length must be >= 1, got {n}")
    if window is None or window < 1:
        raise ParameterError(f"window must be >= 1, got {window}")
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    dist = np.abs(i - j)
    if pattern_kind == "local":
        allowed = dist <= window
    elif pattern_kind in ("strided", "fixed"):
        if stride is None or stride < 1:
            raise ParameterError(f"stride must be >= 1, got {stride}")
        if pattern_kind == "strided":
            allowed = (dist <= window) | (dist % stride == 0)
        else:
            c = min(window, stride)
            allowed = (i // stride == j // stride) | (j % stride >= stride - c)
    elif pattern_kind in ("longformer", "bigbird"):
        if num_global is None or num_global < 0:
            raise ParameterError(f"num_global must be >= 0, got {num_global}")
        g = min(num_global, n)
        allowed = dist <= window
        allowed[:g, :] = True
        allowed[:, :g] = True
        if pattern_kind == "bigbird" and num_random:
            if rng is None:
                raise ParameterError("bigbird patterns need a seeded Rng")
            r = min(num_random, n)
            for row in range(n):
                allowed[row, rng.choice(n, size=r, replace=False)] = True
    else:
        raise ParameterError(f"unknown pattern kind {pattern_kind!r}")
    allowed = np.array(allowed, dtype=bool)
    np.fill_diagonal(allowed, True)
    return SparsityPattern(n, allowed)


@lru_cache(maxsize=16)
def cached_pattern(pattern_kind, n, window, stride, num_global, num_random, seed) -> SparsityPattern:
    return build_sparsity_pattern(pattern_kind, n, window, stride, num_global or 0, num_random or 0,
                                  Rng(seed))


def pattern_attention(q: Tensor, k: Tensor, v: Tensor, pattern: SparsityPattern,
                      key_mask=None) -> AttentionOutput:
    """Full attention with logits outside the pattern sent to -inf."""
    check_qkv(q, k, v)
    n = k.shape[-2]
    if pattern.n != n or q.shape[-2] != n:
        raise DimensionError(f"pattern is for N={pattern.n}, inputs have N={n}")
    km = key_mask_array(key_mask, n)
    mask = pattern.allowed
    if km is not None:
        mask = mask & km[..., None, :]
        # a padded query may see only padded keys; let it attend to itself
        empty = ~mask.any(axis=-1, keepdims=True)
        if empty.any():
            mask = mask | (empty & np.eye(n, dtype=bool))
    logits = (q * (1.0 / math.sqrt(q.shape[-1]))) @ k.T
    w = softmax(logits, mask)
    del logits
    return AttentionOutput(w @ v, w)
