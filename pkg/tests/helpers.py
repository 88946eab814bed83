"""Independent 64-bit oracles and a finite-difference gradient checker."""
import numpy as np

from arena.substrate import Tape, Tensor, grad, precision


def softmax64(x, mask=None):
    x = np.asarray(x, dtype=np.float64)
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def attention64(q, k, v, mask=None):
    """Double loop over queries; no vectorized softmax shared with the library."""
    q, k, v = (np.asarray(a, dtype=np.float64) for a in (q, k, v))
    n, d = q.shape
    out = np.zeros((n, v.shape[1]))
    weights = np.zeros((n, k.shape[0]))
    for i in range(n):
        logits = [float(q[i] @ k[j]) / np.sqrt(d) for j in range(k.shape[0])]
        allowed = [True] * len(logits) if mask is None else list(mask[i])
        m = max(l for l, a in zip(logits, allowed) if a)
        ws = [np.exp(l - m) if a else 0.0 for l, a in zip(logits, allowed)]
        s = sum(ws)
        for j, w in enumerate(ws):
            weights[i, j] = w / s
            out[i] += (w / s) * v[j]
    return out, weights


def unit_rows(rng, n, d):
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def gradcheck(fn, arrays, h=1e-3, seed=0):
    """Relative error between tape gradients (float32) and central differences (float64).

    ``fn`` maps tensors to a tensor; the scalar loss is sum(fn(...) * R) for a
    fixed random R. Returns the worst norm-wise relative error over inputs.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    ts = [Tensor(a) for a in arrays]
    with Tape() as tape:
        out = fn(*ts)
        r = np.random.default_rng(seed).normal(size=out.shape)
        loss = (out * r.astype(np.float32)).sum()
    gs = grad(tape, loss, *ts)

    def f64(vals):
        with precision(np.float64):
            o = fn(*[Tensor(a) for a in vals])
            return float((o.data * r).sum())

    worst = 0.0
    for idx, a in enumerate(arrays):
        fd = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            mi = it.multi_index
            plus = [x.copy() for x in arrays]
            minus = [x.copy() for x in arrays]
            plus[idx][mi] += h
            minus[idx][mi] -= h
            fd[mi] = (f64(plus) - f64(minus)) / (2 * h)
        g = gs[idx].data.astype(np.float64)
        denom = max(np.linalg.norm(g), np.linalg.norm(fd), 1e-12)
        worst = max(worst, np.linalg.norm(g - fd) / denom)
    return worst


def lsh_margin_ok(x, rot, h=1e-3):
    """True when no finite-difference step of size h can flip a hash bucket."""
    xn = x / np.linalg.norm(x, axis=-1, keepdims=True)
    proj = np.einsum("nd,rdh->rnh", xn, rot)
    full = np.sort(np.concatenate([proj, -proj], -1), -1)
    return (full[..., -1] - full[..., -2]).min() > 50 * h


def listops_oracle(symbols):
    """Recursive-descent evaluation straight from the symbol list, no library parser."""
    pos = 0

    def node():
        nonlocal pos
        tok = symbols[pos]
        pos += 1
        if tok.isdigit():
            return int(tok)
        op = tok[1:]
        vals = []
        while symbols[pos] != "]":
            vals.append(node())
        pos += 1
        if op == "MAX":
            return max(vals)
        if op == "MIN":
            return min(vals)
        if op == "SUM_MOD":
            return sum(vals) % 10
        vals.sort()
        mid = len(vals) // 2
        return vals[mid] if len(vals) % 2 else (vals[mid - 1] + vals[mid]) // 2

    out = node()
    assert pos == len(symbols)
    return out
