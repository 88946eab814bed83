"""Live-tensor byte accounting.

Every tensor charges its buffer to the meter of the thread that created it
and refunds it when it is garbage collected. Peak memory is therefore an
analytic, hardware independent count of tensor bytes, not process RSS.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass


class MemoryMeter:
    __slots__ = ("current", "peak", "allocs", "frees")

    def __init__(self):
        self.current = 0
        self.peak = 0
        self.allocs = 0
        self.frees = 0

    def alloc(self, nbytes: int) -> None:
        self.allocs += 1
        self.current += nbytes
        if self.current > self.peak:
            self.peak = self.current

    def free(self, nbytes: int) -> None:
        self.frees += 1
        self.current -= nbytes


_local = threading.local()


def meter() -> MemoryMeter:
    m = getattr(_local, "meter", None)
    if m is None:
        m = _local.meter = MemoryMeter()
    return m


@dataclass
class ScopeResult:
    peak_bytes: int = 0
    start_bytes: int = 0


@contextmanager
def memory_scope():
    """Track the peak of bytes allocated inside the block.

    The reported peak is relative to the live bytes at entry, so tensors that
    already existed are not counted. Nested scopes report their own peak and
    still contribute to the enclosing one.
    """
    m = meter()
    res = ScopeResult(start_bytes=m.current)
    outer_peak = m.peak
    m.peak = m.current
    try:
        yield res
    finally:
        inner_peak = m.peak
        res.peak_bytes = inner_peak - res.start_bytes
        m.peak = max(outer_peak, inner_peak)


def measure_scope(f, *args, **kwargs):
    """Run ``f`` and return ``(result, peak_bytes)``."""
    with memory_scope() as res:
        out = f(*args, **kwargs)
    return out, res.peak_bytes
