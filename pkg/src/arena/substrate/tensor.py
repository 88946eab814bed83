"""Immutable float tensors and a tape for reverse-mode differentiation.

Nodes on the tape refer to tensors by a serial number rather than by object,
so an intermediate is released as soon as neither user code nor a backward
closure needs it. That keeps the memory meter honest about what training
really has to retain.
"""
from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionError, DisconnectedGraphError
from .memory import meter

_serial = itertools.count(1)
_local = threading.local()


def _tapes() -> list:
    t = getattr(_local, "tapes", None)
    if t is None:
        t = _local.tapes = []
    return t


def default_dtype():
    return getattr(_local, "dtype", np.float32)


@contextmanager
def precision(dtype):
    """Temporarily change the dtype new tensors are created with.

    Only test oracles use this (to evaluate in 64-bit); library code always
    runs at the default 32-bit precision.
    """
    prev = default_dtype()
    _local.dtype = np.dtype(dtype).type
    try:
        yield
    finally:
        _local.dtype = prev


@contextmanager
def no_record():
    """Suspend tape recording (evaluation inside a training scope)."""
    prev = getattr(_local, "paused", False)
    _local.paused = True
    try:
        yield
    finally:
        _local.paused = prev


def is_recording() -> bool:
    return bool(_tapes()) and not getattr(_local, "paused", False)


class Tensor:
    __slots__ = ("data", "uid", "_nbytes", "_meter", "_base", "__weakref__")

    def __init__(self, data, dtype=None):
        arr = np.array(data, dtype=dtype or default_dtype(), copy=True)
        self._init(arr, None)

    def _init(self, arr: np.ndarray, base: "Tensor | None"):
        arr.flags.writeable = False
        self.data = arr
        self.uid = next(_serial)
        self._base = base
        self._nbytes = 0 if base is not None else arr.nbytes
        m = self._meter = meter()
        m.alloc(self._nbytes)

    def __del__(self):
        try:
            self._meter.free(self._nbytes)
        except AttributeError:
            pass

    @classmethod
    def wrap(cls, arr: np.ndarray, base: "Tensor | None" = None) -> "Tensor":
        """Adopt ``arr`` without copying. ``base`` marks a view of another tensor."""
        arr = np.asarray(arr)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(default_dtype())
        t = cls.__new__(cls)
        t._init(arr, base)
        return t

    # --- metadata -----------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def nbytes(self) -> int:
        return self._nbytes

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_not_scalar(self)

    def __repr__(self):
        return f"Tensor(shape={list(self.shape)}, dtype={self.dtype.name})"

    def __len__(self):
        return self.shape[0]

    # --- operators ----------------------------------------------------------
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    def swapaxes(self, a, b):
        return swapaxes(self, a, b)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


def _raise_not_scalar(t):
    raise DimensionError(f"item() needs a single-element tensor, got shape {list(t.shape)}")


def tensor(data, dtype=None) -> Tensor:
    return Tensor(data, dtype)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def zeros(shape) -> Tensor:
    return Tensor.wrap(np.zeros(shape, dtype=default_dtype()))


def ones(shape) -> Tensor:
    return Tensor.wrap(np.ones(shape, dtype=default_dtype()))


def detach(x: Tensor) -> Tensor:
    return Tensor.wrap(x.data, base=x)


# --- tape ---------------------------------------------------------------------
class _Node:
    __slots__ = ("out", "ins", "shapes", "backward")

    def __init__(self, out, ins, shapes, backward):
        self.out = out
        self.ins = ins
        self.shapes = shapes
        self.backward = backward


def record(out: Tensor, inputs: Sequence, backward: Callable) -> Tensor:
    """Register ``out = op(inputs)`` on every active tape.

    ``backward(g)`` receives the upstream gradient as an ndarray and returns
    one ndarray (or None) per input. Non-tensor inputs are ignored.
    """
    if not is_recording():
        return out
    ins = tuple(i.uid if isinstance(i, Tensor) else None for i in inputs)
    shapes = tuple(i.shape if isinstance(i, Tensor) else None for i in inputs)
    node = _Node(out.uid, ins, shapes, backward)
    for tape in _tapes():
        tape.nodes.append(node)
    return out


class Tape:
    """Records differentiable ops executed while it is active.

    Use as a context manager; gradients may be requested after exit.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self):
        _tapes().append(self)
        return self

    def __exit__(self, *exc):
        _tapes().remove(self)
        return False

    def gradient(self, loss: Tensor, *wrt: Tensor, allow_unused: bool = False) -> list[Tensor]:
        if loss.size != 1:
            raise DimensionError(f"loss must be scalar, got shape {list(loss.shape)}")
        targets = {w.uid for w in wrt}
        grads: dict[int, Tensor] = {loss.uid: Tensor.wrap(np.ones(loss.shape, dtype=loss.dtype))}
        with no_record():
            for node in reversed(self.nodes):
                g = grads.get(node.out)
                if g is None:
                    continue
                if node.out not in targets:
                    del grads[node.out]
                in_grads = node.backward(g.data)
                del g
                for uid, shape, gi in zip(node.ins, node.shapes, in_grads):
                    if uid is None or gi is None:
                        continue
                    gi = unbroadcast(np.asarray(gi), shape)
                    prev = grads.get(uid)
                    if prev is None:
                        if not gi.flags.owndata or not gi.flags.writeable:
                            gi = gi.copy()
                        grads[uid] = Tensor.wrap(gi)
                    else:
                        grads[uid] = Tensor.wrap(prev.data + gi)
        out = []
        for w in wrt:
            gw = grads.get(w.uid)
            if gw is None:
                if not allow_unused:
                    raise DisconnectedGraphError(
                        f"tensor of shape {list(w.shape)} is not connected to the loss on this tape"
                    )
                gw = Tensor.wrap(np.zeros(w.shape, dtype=w.dtype))
            out.append(gw)
        return out


def grad(tape: Tape, loss: Tensor, *wrt: Tensor, allow_unused: bool = False) -> list[Tensor]:
    return tape.gradient(loss, *wrt, allow_unused=allow_unused)


def unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _arr(x):
    return x.data if isinstance(x, Tensor) else x


# --- elementwise ----------------------------------------------------------------
def add(a, b) -> Tensor:
    out = Tensor.wrap(np.add(_arr(a), _arr(b)))
    return record(out, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    out = Tensor.wrap(np.subtract(_arr(a), _arr(b)))
    return record(out, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    out = Tensor.wrap(np.multiply(_arr(a), _arr(b)))
    return record(out, (a, b), lambda g: (
        g * _arr(b) if isinstance(a, Tensor) else None,
        g * _arr(a) if isinstance(b, Tensor) else None,
    ))


def div(a, b) -> Tensor:
    out = Tensor.wrap(np.divide(_arr(a), _arr(b)))

    def back(g):
        bd = _arr(b)
        ga = g / bd if isinstance(a, Tensor) else None
        gb = -g * _arr(a) / (bd * bd) if isinstance(b, Tensor) else None
        return ga, gb

    return record(out, (a, b), back)


# --- linear algebra ---------------------------------------------------------------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = _arr(a), _arr(b)
    if ad.ndim < 2 or bd.ndim < 2 or ad.shape[-1] != bd.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {list(ad.shape)} x {list(bd.shape)}")
    try:
        res = np.matmul(ad, bd)
    except ValueError as exc:
        raise DimensionError(f"matmul shape mismatch: {list(ad.shape)} x {list(bd.shape)}") from exc
    out = Tensor.wrap(res)

    def back(g):
        ga = np.matmul(g, np.swapaxes(_arr(b), -1, -2)) if isinstance(a, Tensor) else None
        gb = np.matmul(np.swapaxes(_arr(a), -1, -2), g) if isinstance(b, Tensor) else None
        return ga, gb

    return record(out, (a, b), back)


# --- reductions -----------------------------------------------------------------
def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor.wrap(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)))
    shape = x.shape

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape),)

    return record(out, (x,), back)


def mean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    n = x.size if axis is None else int(np.prod([x.shape[a] for a in np.atleast_1d(axis)]))
    return mul(tsum(x, axis, keepdims), 1.0 / n)


# --- shape ops (views) -----------------------------------------------------------
def reshape(x: Tensor, shape) -> Tensor:
    src = x.shape
    res = x.data.reshape(shape)
    # reshaping a non-contiguous array copies; only true views ride on x's bytes
    out = Tensor.wrap(res, base=x if np.may_share_memory(res, x.data) else None)
    return record(out, (x,), lambda g: (g.reshape(src),))


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))
    out = Tensor.wrap(x.data.transpose(axes), base=x)
    return record(out, (x,), lambda g: (g.transpose(inv),))


def swapaxes(x: Tensor, a: int, b: int) -> Tensor:
    out = Tensor.wrap(np.swapaxes(x.data, a, b), base=x)
    return record(out, (x,), lambda g: (np.swapaxes(g, a, b),))


def _is_basic(key) -> bool:
    items = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is None or k is Ellipsis for k in items)


def getitem(x: Tensor, key) -> Tensor:
    if isinstance(key, Tensor):
        raise TypeError("index with ndarrays, not tensors")
    basic = _is_basic(key)
    res = x.data[key]
    out = Tensor.wrap(res, base=x) if basic else Tensor.wrap(np.array(res))
    shape, dt = x.shape, x.dtype

    def back(g):
        gx = np.zeros(shape, dtype=dt)
        if basic:
            gx[key] = g
        else:
            np.add.at(gx, key, g)
        return (gx,)

    return record(out, (x,), back)


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    arrs = [_arr(t) for t in xs]
    out = Tensor.wrap(np.concatenate(arrs, axis=axis))
    sizes = np.cumsum([a.shape[axis] for a in arrs])[:-1]
    return record(out, tuple(xs), lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = Tensor.wrap(np.stack([_arr(t) for t in xs], axis=axis))
    n = len(xs)
    return record(out, tuple(xs), lambda g: tuple(np.take(g, i, axis=axis) for i in range(n)))
