"""Sinkhorn attention with soft block mixing."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from ..substrate import Tensor, concat, exp, logsumexp, softmax, where, zeros
from .common import AttentionOutput, check_qkv, key_mask_array, zero_padded

BLOCKED = -1e9


def sinkhorn_normalize(logits: Tensor, iters: int) -> Tensor:
    """Alternate row/column normalization in log space, return exp of the result."""
    if iters < 1:
        raise ParameterError(f"sinkhorn iterations must be >= 1, got {iters}")
    x = logits
    for _ in range(iters):
        x = x - logsumexp(x, axis=-1, keepdims=True)
        x = x - logsumexp(x, axis=-2, keepdims=True)
    return exp(x)


def sinkhorn_attention(q: Tensor, k: Tensor, v: Tensor, block_size: int, iters: int = 8,
                       key_mask=None, block_logits=None) -> AttentionOutput:
    """Each query block attends to its own keys plus a Sinkhorn-mixed block.

    Blocks do not overlap. Block scores default to the scaled dot product of
    block-mean queries and keys; ``block_logits`` overrides them (log space).
    """
    check_qkv(q, k, v)
    if block_size < 1:
        raise ParameterError(f"block_size must be >= 1, got {block_size}")
    if iters < 1:
        raise ParameterError(f"sinkhorn iterations must be >= 1, got {iters}")
    lead = q.shape[:-2]
    n, d = q.shape[-2:]
    km = key_mask_array(key_mask, n)
    valid = np.ones(lead + (n,), dtype=bool) if km is None else np.broadcast_to(km, lead + (n,))
    b = block_size
    nb = math.ceil(n / b)
    npad = nb * b
    qz, kz, vz = q, zero_padded(k, km), zero_padded(v, km)
    if npad > n:
        qz, kz, vz = (concat([t, zeros(lead + (npad - n, t.shape[-1]))], axis=-2) for t in (qz, kz, vz))
        valid = np.concatenate([valid, np.zeros(lead + (npad - n,), dtype=bool)], axis=-1)
    qb = qz.reshape(lead + (nb, b, d))
    kb = kz.reshape(lead + (nb, b, d))
    dv = v.shape[-1]
    vb = vz.reshape(lead + (nb, b, dv))
    vblk = valid.reshape(lead + (nb, b))
    cnt = vblk.sum(axis=-1)
    inv = (1.0 / np.maximum(cnt, 1))[..., None].astype(q.dtype)

    if block_logits is None:
        qbar = (zero_padded(qb, vblk)).sum(axis=-2) * inv
        kbar = kb.sum(axis=-2) * inv
        scores = (qbar * (1.0 / math.sqrt(d))) @ kbar.T
    else:
        scores = block_logits if isinstance(block_logits, Tensor) else Tensor(block_logits, dtype=q.dtype)
    bval = cnt > 0
    eye = np.eye(nb, dtype=bool)
    keep = (bval[..., :, None] & bval[..., None, :]) | (eye & ~bval[..., :, None])
    if not keep.all():
        scores = where(keep, scores, BLOCKED)
    mix = sinkhorn_normalize(scores, iters)

    kmix = (mix @ kb.reshape(lead + (nb, b * d))).reshape(lead + (nb, b, d))
    vmix = (mix @ vb.reshape(lead + (nb, b * dv))).reshape(lead + (nb, b, dv))
    mval = (mix.data @ vblk.astype(mix.dtype)) > 0
    keys = concat([kb, kmix], axis=-2)
    vals = concat([vb, vmix], axis=-2)
    kval = np.concatenate([np.broadcast_to(vblk, mval.shape), mval], axis=-1)
    mask = np.broadcast_to(kval[..., None, :], kval.shape[:-1] + (b, 2 * b))
    empty = ~mask.any(axis=-1, keepdims=True)
    if empty.any():
        mask = mask | empty
    logits = (qb * (1.0 / math.sqrt(d))) @ keys.T
    w = softmax(logits, mask)
    out = (w @ vals).reshape(lead + (npad, dv))[..., :n, :]
    return AttentionOutput(out)
