"""Linformer: attention against k projected summary keys/values."""
from __future__ import annotations

import math

from ..errors import DimensionError, LengthError, ParameterError
from ..substrate import Tensor, softmax
from .common import DEFAULT_CHUNK, AttentionOutput, check_qkv, key_mask_array, map_query_chunks, zero_padded


def linformer_attention(q: Tensor, k: Tensor, v: Tensor, e: Tensor, f: Tensor | None = None,
                        key_mask=None, chunk: int | None = DEFAULT_CHUNK) -> AttentionOutput:
    """softmax(Q (E K)^T / sqrt(d)) (F V) with E, F of shape (k, L), L >= N.

    Projections wider than the sequence are truncated to its first N columns,
    so one fixed-length projection serves every shorter input. Padded keys are
    zeroed before projection and therefore contribute nothing.
    """
    check_qkv(q, k, v)
    n = k.shape[-2]
    shared = f is None or f is e
    f = e if shared else f
    if e.ndim != 2 or e.shape[0] < 1:
        raise ParameterError(f"projection must be (k, N) with k >= 1, got {list(e.shape)}")
    if f.shape != e.shape:
        raise DimensionError(f"E {list(e.shape)} and F {list(f.shape)} differ")
    if e.shape[1] < n:
        raise LengthError(f"projection covers {e.shape[1]} positions, sequence has {n}")
    if e.shape[1] > n:
        e = e[:, :n]
        f = e if shared else f[:, :n]
    km = key_mask_array(key_mask, n)
    ek = e @ zero_padded(k, km)
    fv = f @ zero_padded(v, km)
    ekt = ek.T
    scale = 1.0 / math.sqrt(q.shape[-1])

    def rows(qc):
        return softmax((qc * scale) @ ekt) @ fv

    return AttentionOutput(map_query_chunks(rows, q, chunk))
