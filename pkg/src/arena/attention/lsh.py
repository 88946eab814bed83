"""Reformer-style LSH attention over tied query/key vectors."""
from __future__ import annotations

import math

import numpy as np

from ..errors import ParameterError
from ..substrate import Rng, Tensor, concat, exp, gather_rows, logsumexp, softmax, stack, tsum, zeros
from .common import AttentionOutput, check_qkv, key_mask_array

SELF_LOGIT = -1e5  # only wins when a token has no other candidate
MASK_LOGIT = -1e9


def default_buckets(n: int, bucket_size: int) -> int:
    return max(2, 2 * math.ceil(n / (2 * bucket_size)))


def draw_rotations(rounds: int, d: int, n_buckets: int, rng: Rng) -> np.ndarray:
    if n_buckets < 2 or n_buckets % 2:
        raise ParameterError(f"n_buckets must be an even number >= 2, got {n_buckets}")
    return rng.normal(size=(rounds, d, n_buckets // 2))


def lsh_buckets(x: np.ndarray, rotations: np.ndarray) -> np.ndarray:
    """Angular LSH: argmax over [xR, -xR] per hash round. Returns (rounds, ..., N)."""
    xn = x / (np.linalg.norm(x, axis=-1, keepdims=True) + 1e-12)
    proj = np.einsum("...nd,rdh->r...nh", xn, rotations.astype(x.dtype))
    return np.argmax(np.concatenate([proj, -proj], axis=-1), axis=-1)


def lsh_attention(qk: Tensor, v: Tensor, hash_rounds: int, bucket_size: int, rng: Rng | None = None,
                  n_buckets: int | None = None, exclude_self: bool = True, key_mask=None,
                  rotations: np.ndarray | None = None) -> AttentionOutput:
    """Hash, sort by bucket, attend within each chunk and the one before it.

    Rounds are merged with weights softmax(logsumexp_r) so the result is the
    softmax over the union of candidates when rounds are disjoint. Padded
    tokens get a sentinel bucket that sorts after every real token, which
    keeps real tokens' chunks unchanged when padding is appended.
    """
    check_qkv(qk, qk, v)
    if hash_rounds < 1 or bucket_size < 1:
        raise ParameterError(f"hash_rounds and bucket_size must be >= 1, got {hash_rounds}, {bucket_size}")
    lead = qk.shape[:-2]
    n, d = qk.shape[-2:]
    km = key_mask_array(key_mask, n)
    if rotations is None:
        if n_buckets is None:
            n_buckets = default_buckets(n, bucket_size)
        if rng is None:
            raise ParameterError("LSH attention needs an Rng or explicit rotations")
        rotations = draw_rotations(hash_rounds, d, n_buckets, rng)
    n_buckets = 2 * rotations.shape[-1]
    buckets = lsh_buckets(qk.data, rotations[:hash_rounds])
    valid = np.ones(lead + (n,), dtype=bool) if km is None else np.broadcast_to(km, lead + (n,))
    buckets = np.where(valid, buckets, n_buckets)

    c = bucket_size
    n_chunks = math.ceil(n / c)
    npad = n_chunks * c
    pos = np.arange(n)
    scale = 1.0 / math.sqrt(d)
    outs, lses = [], []
    for r in range(hash_rounds):
        perm = np.argsort(buckets[r] * (n + 1) + pos, axis=-1, kind="stable")
        undo = np.argsort(perm, axis=-1)
        sq = gather_rows(qk, perm, unique=True)
        sv = gather_rows(v, perm, unique=True)
        spos = perm
        sval = np.take_along_axis(valid, perm, axis=-1)
        if npad > n:
            sq = concat([sq, zeros(lead + (npad - n, d))], axis=-2)
            sv = concat([sv, zeros(lead + (npad - n, v.shape[-1]))], axis=-2)
            spos = np.concatenate([spos, np.full(lead + (npad - n,), -1)], axis=-1)
            sval = np.concatenate([sval, np.zeros(lead + (npad - n,), dtype=bool)], axis=-1)
        qc = sq.reshape(lead + (n_chunks, c, d))
        vc = sv.reshape(lead + (n_chunks, c, v.shape[-1]))
        pc = spos.reshape(lead + (n_chunks, c))
        mc = sval.reshape(lead + (n_chunks, c))
        if n_chunks > 1:
            kk = concat([qc, concat([qc[..., :1, :, :], qc[..., :-1, :, :]], axis=-3)], axis=-2)
            vv = concat([vc, concat([vc[..., :1, :, :], vc[..., :-1, :, :]], axis=-3)], axis=-2)
            prev_ok = np.concatenate([np.zeros_like(mc[..., :1, :]), mc[..., :-1, :]], axis=-2)
            kpos = np.concatenate([pc, np.concatenate([pc[..., :1, :], pc[..., :-1, :]], axis=-2)], axis=-1)
            kval = np.concatenate([mc, prev_ok], axis=-1)
        else:
            kk, vv, kpos, kval = qc, vc, pc, mc
        bias = np.where(kval[..., None, :], 0.0, MASK_LOGIT)
        if exclude_self:
            bias = bias + np.where(pc[..., :, None] == kpos[..., None, :], SELF_LOGIT, 0.0)
        logits = (qc * scale) @ kk.T + bias.astype(qk.dtype)
        lse = logsumexp(logits, axis=-1, keepdims=True)
        o = exp(logits - lse) @ vv
        o = o.reshape(lead + (npad, v.shape[-1]))[..., :n, :]
        lse = lse.reshape(lead + (npad, 1))[..., :n, :]
        outs.append(gather_rows(o, undo, unique=True))
        lses.append(gather_rows(lse, undo, unique=True))
    if hash_rounds == 1:
        return AttentionOutput(outs[0])
    w = softmax(stack(lses, axis=0), axis=0)
    return AttentionOutput(tsum(stack(outs, axis=0) * w, axis=0))
