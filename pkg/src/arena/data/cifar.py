"""CIFAR-10 binary batches: 1 label byte then 1024 R, 1024 G, 1024 B bytes per record."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..tasks.pixels import PixelSequence, image_to_sequence

RECORD_BYTES = 3073
SIDE = 32
# Rec. 601 luma, in thousandths so rounding is exact integer arithmetic
LUMA = (299, 587, 114)


@dataclass(frozen=True)
class Cifar10Record:
    label: int
    pixels: np.ndarray  # (3, 32, 32) uint8, channel-planar

    def to_bytes(self) -> bytes:
        return bytes([self.label]) + self.pixels.astype(np.uint8).tobytes()


def parse_cifar10_bytes(data: bytes, source: str = "<bytes>") -> list[Cifar10Record]:
    rem = len(data) % RECORD_BYTES
    if rem:
        raise FormatError(f"{source}: {len(data)} bytes is not a whole number of {RECORD_BYTES}-byte records "
                          f"({rem} trailing bytes)")
    arr = np.frombuffer(data, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    bad = np.nonzero(arr[:, 0] > 9)[0]
    if bad.size:
        raise FormatError(f"{source}: record {int(bad[0])} has label byte {int(arr[bad[0], 0])} (> 9)")
    return [Cifar10Record(int(r[0]), r[1:].reshape(3, SIDE, SIDE).copy()) for r in arr]


def parse_cifar10(path) -> list[Cifar10Record]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_cifar10_bytes(data, str(path))


def write_cifar10(path, records) -> Path:
    path = Path(path)
    path.write_bytes(b"".join(r.to_bytes() for r in records))
    return path


def grayscale_values(r, g, b) -> np.ndarray:
    """round(0.299 R + 0.587 G + 0.114 B) with halves rounded up, in 0-255."""
    r, g, b = (np.asarray(x, dtype=np.int64) for x in (r, g, b))
    return np.clip((LUMA[0] * r + LUMA[1] * g + LUMA[2] * b + 500) // 1000, 0, 255).astype(np.uint8)


def to_grayscale(record: Cifar10Record) -> PixelSequence:
    p = record.pixels
    return image_to_sequence(grayscale_values(p[0], p[1], p[2]))


def load_cifar_sequences(paths) -> list[tuple[PixelSequence, int]]:
    out = []
    for path in paths:
        out.extend((to_grayscale(r), r.label) for r in parse_cifar10(path))
    return out
