"""Numeric substrate: tensors, tape autodiff, randomness and memory metering."""
from .memory import MemoryMeter, measure_scope, memory_scope, meter
from .ops import (
    EPS,
    cross_entropy,
    dropout,
    elu,
    exp,
    gather_rows,
    layer_norm,
    log,
    logsumexp,
    relu,
    softmax,
    sqrt,
    square,
    take,
    tanh,
    where,
)
from .rng import Rng, as_rng
from .tensor import (
    Tape,
    Tensor,
    add,
    as_tensor,
    concat,
    default_dtype,
    detach,
    div,
    getitem,
    grad,
    is_recording,
    matmul,
    mean,
    mul,
    no_record,
    ones,
    precision,
    record,
    reshape,
    stack,
    sub,
    swapaxes,
    tensor,
    transpose,
    tsum,
    zeros,
)

softmax_rows = softmax
