"""Differentiable nonlinearities, normalizations and indexing primitives."""
from __future__ import annotations

import numpy as np

from ..errors import DegenerateRowError, DimensionError
from .tensor import Tensor, _arr, record

EPS = 1e-6


def exp(x: Tensor) -> Tensor:
    out = Tensor.wrap(np.exp(x.data))
    return record(out, (x,), lambda g: (g * out.data,))


def log(x: Tensor) -> Tensor:
    out = Tensor.wrap(np.log(x.data))
    return record(out, (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    out = Tensor.wrap(np.sqrt(x.data))
    return record(out, (x,), lambda g: (g * 0.5 / out.data,))


def square(x: Tensor) -> Tensor:
    out = Tensor.wrap(np.square(x.data))
    return record(out, (x,), lambda g: (2.0 * g * x.data,))


def tanh(x: Tensor) -> Tensor:
    out = Tensor.wrap(np.tanh(x.data))
    return record(out, (x,), lambda g: (g * (1.0 - out.data * out.data),))


def relu(x: Tensor) -> Tensor:
    out = Tensor.wrap(np.maximum(x.data, 0))
    return record(out, (x,), lambda g: (g * (x.data > 0),))


def elu(x: Tensor) -> Tensor:
    """x for x > 0, exp(x) - 1 otherwise."""
    pos = x.data > 0
    e = np.exp(np.minimum(x.data, 0))
    out = Tensor.wrap(np.where(pos, x.data, e - 1))
    return record(out, (x,), lambda g: (g * np.where(pos, 1, e),))


def where(cond: np.ndarray, a, b) -> Tensor:
    cond = np.asarray(cond, dtype=bool)
    out = Tensor.wrap(np.where(cond, _arr(a), _arr(b)))
    return record(out, (a, b), lambda g: (
        np.where(cond, g, 0) if isinstance(a, Tensor) else None,
        np.where(cond, 0, g) if isinstance(b, Tensor) else None,
    ))


def _check_rows(mask: np.ndarray, shape, axis: int):
    full = np.broadcast_to(mask, np.broadcast_shapes(mask.shape, shape))
    ok = full.any(axis=axis)
    if not ok.all():
        bad = np.argwhere(~ok)[0].tolist()
        raise DegenerateRowError(f"row {bad} has no allowed entries (shape {list(shape)})")


def softmax(x: Tensor, mask: np.ndarray | None = None, axis: int = -1) -> Tensor:
    """Max-subtracted softmax; masked entries come out exactly zero."""
    xd = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        _check_rows(mask, xd.shape, axis)
        z = np.where(mask, xd, -np.inf)
    else:
        z = xd.copy()
    z -= z.max(axis=axis, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=axis, keepdims=True)
    out = Tensor.wrap(z)

    def back(g):
        p = out.data
        if axis in (-1, p.ndim - 1):
            s = np.einsum("...i,...i->...", g, p)[..., None]
        else:
            s = np.sum(g * p, axis=axis, keepdims=True)
        gx = g - s
        gx *= p
        return (gx,)

    return record(out, (x,), back)


def logsumexp(x: Tensor, axis: int = -1, keepdims: bool = False, mask: np.ndarray | None = None) -> Tensor:
    xd = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        _check_rows(mask, xd.shape, axis)
        xd = np.where(mask, xd, -np.inf)
    m = xd.max(axis=axis, keepdims=True)
    s = np.exp(xd - m).sum(axis=axis, keepdims=True)
    res = np.log(s) + m
    out = Tensor.wrap(res if keepdims else np.squeeze(res, axis=axis))

    def back(g):
        gk = g if keepdims else np.expand_dims(g, axis)
        p = np.exp(xd - res)
        return (gk * p,)

    return record(out, (x,), back)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = EPS) -> Tensor:
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = Tensor.wrap(xc * rstd)
    rstd_t = Tensor.wrap(rstd.astype(xd.dtype))
    out = Tensor.wrap(xhat.data * gamma.data + beta.data)

    def back(g):
        xh = xhat.data
        lead = tuple(range(g.ndim - 1))
        dgamma = (g * xh).sum(axis=lead)
        dbeta = g.sum(axis=lead)
        dxh = g * gamma.data
        dx = rstd_t.data * (dxh - dxh.mean(-1, keepdims=True) - xh * (dxh * xh).mean(-1, keepdims=True))
        return dx, dgamma, dbeta

    return record(out, (x, gamma, beta), back)


def cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean softmax cross entropy over a (B, C) batch of logits."""
    ld = logits.data
    labels = np.asarray(labels, dtype=np.int64)
    if ld.ndim != 2 or labels.shape != (ld.shape[0],):
        raise DimensionError(f"cross_entropy expects (B, C) logits and (B,) labels, got "
                             f"{list(ld.shape)} and {list(labels.shape)}")
    z = ld - ld.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(ld.shape[0])
    out = Tensor.wrap(np.asarray(-logp[rows, labels].mean(), dtype=ld.dtype))
    probs = Tensor.wrap(np.exp(logp))

    def back(g):
        gl = probs.data.copy()
        gl[rows, labels] -= 1.0
        return (gl * (g / ld.shape[0]),)

    return record(out, (logits,), back)


def take(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]`` (embedding gather)."""
    ids = np.asarray(ids, dtype=np.int64)
    out = Tensor.wrap(table.data[ids])
    shape, dt = table.shape, table.dtype

    def back(g):
        gt = np.zeros(shape, dtype=dt)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, shape[-1]))
        return (gt,)

    return record(out, (table,), back)


def gather_rows(x: Tensor, idx: np.ndarray, unique: bool = False) -> Tensor:
    """``out[..., m, :] = x[..., idx[..., m], :]`` along the second-to-last axis.

    ``unique`` promises that idx holds no repeats within a row, which allows a
    plain scatter in the backward pass.
    """
    idx = np.asarray(idx, dtype=np.int64)
    lead = x.shape[:-2]
    if idx.shape[:-1] != lead:
        idx = np.broadcast_to(idx, lead + idx.shape[-1:])
    n, d = x.shape[-2:]
    b = int(np.prod(lead)) if lead else 1
    x2 = x.data.reshape(b, n, d)
    i2 = idx.reshape(b, -1)
    rows = np.arange(b)[:, None]
    out = Tensor.wrap(x2[rows, i2].reshape(lead + (i2.shape[1], d)))
    dt = x.dtype

    def back(g):
        gx = np.zeros((b, n, d), dtype=dt)
        g2 = g.reshape(b, -1, d)
        if unique:
            gx[rows, i2] = g2
        else:
            np.add.at(gx, (rows, i2), g2)
        return (gx.reshape(lead + (n, d)),)

    return record(out, (x,), back)


def dropout(x: Tensor, rate: float, rng) -> Tensor:
    if rate <= 0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    out = Tensor.wrap(x.data * keep)
    return record(out, (x,), lambda g: (g * keep,))
