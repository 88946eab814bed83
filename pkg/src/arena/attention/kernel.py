"""Kernelized attention (Linear Transformer elu+1, Performer FAVOR+).

Both compute phi(q)^T (sum_j phi(k_j) v_j^T) / phi(q)^T sum_j phi(k_j), which
costs O(N m d) and never builds an N x N matrix.
"""
from __future__ import annotations

import math

import numpy as np

from ..errors import NormalizationError, ParameterError
from ..substrate import EPS, Rng, Tensor, elu, exp, tsum
from .common import DEFAULT_CHUNK, AttentionOutput, check_qkv, key_mask_array, map_query_chunks, sum_key_chunks


def orthogonal_gaussian(m: int, d: int, rng: Rng) -> np.ndarray:
    """(m, d) projection whose rows are orthogonal within each block of d.

    Row norms are resampled from the chi distribution so each row is still
    marginally N(0, I_d).
    """
    if m < 1 or d < 1:
        raise ParameterError(f"need m >= 1 and d >= 1, got m={m}, d={d}")
    blocks = []
    for _ in range(math.ceil(m / d)):
        g = rng.normal(size=(d, d))
        qmat, r = np.linalg.qr(g)
        qmat = qmat * np.sign(np.diag(r))[None, :]
        blocks.append(qmat.T)
    w = np.concatenate(blocks, axis=0)[:m]
    norms = np.linalg.norm(rng.normal(size=(m, d)), axis=1)
    return w * norms[:, None]


def random_feature_map(x: Tensor, m: int | None = None, rng: Rng | None = None,
                       projection=None) -> Tensor:
    """Positive random features: exp(w_j . x - |x|^2 / 2) / sqrt(m).

    E[phi(q) . phi(k)] = exp(q . k). Either pass a projection or (m, rng).
    """
    w = _projection(x.shape[-1], m, rng, projection, x.dtype)
    sq = tsum(x * x, axis=-1, keepdims=True) * 0.5
    return exp(x @ w.T - sq) * (1.0 / math.sqrt(w.shape[0]))


def _projection(d, m, rng, projection, dtype) -> Tensor:
    if projection is not None:
        return projection if isinstance(projection, Tensor) else Tensor(projection, dtype=dtype)
    if m is None or m < 1:
        raise ParameterError(f"num_features must be >= 1, got {m}")
    if rng is None:
        raise ParameterError("FAVOR+ needs an Rng (or a frozen projection)")
    return Tensor(orthogonal_gaussian(m, d, rng), dtype=dtype)


def _favor_features(x: Tensor, w: Tensor, shift) -> Tensor:
    """Stabilized features; ``shift`` cancels between numerator and denominator."""
    proj = x @ w.T
    sq = tsum(x * x, axis=-1, keepdims=True) * 0.5
    if shift is None:
        shift = proj.data.max(axis=-1, keepdims=True)
    return exp(proj - sq - shift) * (1.0 / math.sqrt(w.shape[0]))


def _key_shift(kd, w, km, chunk) -> np.ndarray:
    """Per-sequence max of the key projections, over valid keys only."""
    n = kd.shape[-2]
    best = np.full(kd.shape[:-2] + (1, 1), -np.inf, dtype=kd.dtype)
    for s in range(0, n, chunk):
        proj = kd[..., s:s + chunk, :] @ w.T
        if km is not None:
            proj = np.where(km[..., s:s + chunk, None], proj, -np.inf)
        best = np.maximum(best, proj.max(axis=(-2, -1), keepdims=True))
    return best


def kernel_attention(q: Tensor, k: Tensor, v: Tensor, feature_map: str = "elu1",
                     num_features: int | None = None, rng: Rng | None = None, projection=None,
                     key_mask=None, chunk: int | None = DEFAULT_CHUNK) -> AttentionOutput:
    check_qkv(q, k, v)
    n = k.shape[-2]
    km = key_mask_array(key_mask, n)
    if feature_map == "elu1":
        def phi_q(x):
            return elu(x) + 1.0
        phi_k = phi_q
    elif feature_map == "favor_plus":
        w = _projection(q.shape[-1], num_features, rng, projection, q.dtype)
        c = q.shape[-1] ** -0.25
        kshift = _key_shift(k.data * c, w.data, km, chunk or n)

        def phi_q(x):
            return _favor_features(x * c, w, None)

        def phi_k(x):
            return _favor_features(x * c, w, kshift)
    else:
        raise ParameterError(f"unknown feature map {feature_map!r}")

    def key_part(sl):
        pk = phi_k(k[..., sl, :])
        if km is not None:
            pk = pk * km[..., sl, None].astype(pk.dtype)
        return pk.T @ v[..., sl, :], tsum(pk, axis=-2, keepdims=True)

    kv, z = sum_key_chunks(key_part, n, chunk)
    zt = z.T
    # favor features carry an arbitrary common shift, so only underflow is fatal there
    floor = EPS if feature_map == "elu1" else float(np.finfo(q.dtype).tiny)

    def rows(qc):
        pq = phi_q(qc)
        den = pq @ zt
        if float(den.data.min()) < floor:
            raise NormalizationError(
                f"kernel attention denominator {float(den.data.min()):.3g} below {floor:.3g}"
            )
        return (pq @ kv) / den

    return AttentionOutput(map_query_chunks(rows, q, chunk))
