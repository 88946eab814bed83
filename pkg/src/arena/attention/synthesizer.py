"""Synthesizer attention: weights synthesized without query-key dot products."""
from __future__ import annotations

from ..errors import LengthError, ParameterError
from ..substrate import Tensor, relu, softmax
from .common import AttentionOutput, key_mask_array


def synthesizer_attention(x: Tensor, v: Tensor, synth_kind: str, params: dict,
                          key_mask=None) -> AttentionOutput:
    """Dense: logits_i = relu(x_i W1 + b1) W2 + b2. Random: logits = R.

    Both are fixed-length: W2 / R have as many columns as the longest
    supported sequence and are truncated to N.
    """
    n = v.shape[-2]
    km = key_mask_array(key_mask, n)
    if synth_kind == "dense":
        w2, b2 = params["w2"], params["b2"]
        width = w2.shape[-1]
        if n > width:
            raise LengthError(f"dense synthesizer emits {width} logits, sequence has {n}")
        h = relu(x @ params["w1"] + params["b1"])
        if n < width:
            w2, b2 = w2[..., :n], b2[..., :n]
        logits = h @ w2 + b2
    elif synth_kind == "random":
        r = params["r"]
        if n > r.shape[-1]:
            raise LengthError(f"random synthesizer matrix covers {r.shape[-1]} positions, sequence has {n}")
        logits = r[..., :n, :n] if n < r.shape[-1] else r
    else:
        raise ParameterError(f"unknown synthesizer kind {synth_kind!r}")
    w = softmax(logits, None if km is None else km[..., None, :])
    return AttentionOutput(w @ v, w)
