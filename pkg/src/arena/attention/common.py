from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateRowError, DimensionError
from ..substrate import Tensor, is_recording, meter

DEFAULT_CHUNK = 256


@dataclass
class AttentionOutput:
    output: Tensor
    weights: Tensor | None = None


def check_qkv(q: Tensor, k: Tensor, v: Tensor):
    if q.ndim < 2 or q.shape[-1] != k.shape[-1] or k.shape[-2] != v.shape[-2]:
        raise DimensionError(
            f"incompatible attention inputs q={list(q.shape)} k={list(k.shape)} v={list(v.shape)}"
        )
    if q.shape[-1] < 1:
        raise DimensionError("head dimension must be >= 1")


def key_mask_array(key_mask, n: int) -> np.ndarray | None:
    """Normalize a (..., N) validity mask; raise if some sequence is fully padded."""
    if key_mask is None:
        return None
    km = np.asarray(key_mask, dtype=bool)
    if km.shape[-1] != n:
        raise DimensionError(f"key mask length {km.shape[-1]} != sequence length {n}")
    if not km.any(axis=-1).all():
        raise DegenerateRowError("every position of a sequence is padded")
    return km


def zero_padded(x: Tensor, km: np.ndarray | None) -> Tensor:
    if km is None:
        return x
    return x * km[..., None].astype(x.dtype)


def map_query_chunks(fn, q: Tensor, chunk: int | None) -> Tensor:
    """Evaluate a row-wise map over query blocks.

    While a tape is recording the whole block is evaluated at once (backward
    needs every intermediate anyway). Otherwise the transient working set is
    bounded by ``chunk`` rows, which is what keeps inference memory linear for
    mechanisms that never form an N x N matrix.
    """
    n = q.shape[-2]
    if chunk is None or n <= chunk or is_recording():
        return fn(q)
    buf = None
    m = meter()
    for s in range(0, n, chunk):
        part = fn(q[..., s:s + chunk, :])
        if buf is None:
            buf = np.empty(part.shape[:-2] + (n, part.shape[-1]), dtype=part.dtype)
            m.alloc(buf.nbytes)
        buf[..., s:s + chunk, :] = part.data
        del part
    m.free(buf.nbytes)
    return Tensor.wrap(buf)


def sum_key_chunks(fn, n: int, chunk: int | None):
    """Sum ``fn(slice)`` over key blocks; returns a tuple of tensors."""
    if chunk is None or n <= chunk or is_recording():
        return fn(slice(0, n))
    acc = None
    for s in range(0, n, chunk):
        part = fn(slice(s, s + chunk))
        acc = part if acc is None else tuple(a + p for a, p in zip(acc, part))
        del part
    return acc
