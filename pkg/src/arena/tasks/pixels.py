"""Images as row-major pixel-token sequences."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError
from ..tokens import TokenSequence


@dataclass(frozen=True)
class PixelSequence:
    tokens: np.ndarray  # uint8, row-major
    height: int
    width: int

    def __post_init__(self):
        t = np.asarray(self.tokens)
        if t.ndim != 1 or t.shape[0] != self.height * self.width:
            raise DimensionError(f"{t.shape} tokens for a {self.height}x{self.width} image")
        if t.size and (t.min() < 0 or t.max() > 255):
            raise DimensionError("pixel intensities must lie in 0-255")
        object.__setattr__(self, "tokens", t.astype(np.uint8))

    def to_grid(self) -> np.ndarray:
        return self.tokens.reshape(self.height, self.width)

    def to_token_sequence(self) -> TokenSequence:
        return TokenSequence.of(self.tokens.astype(np.int32))

    def __len__(self) -> int:
        return self.tokens.shape[0]


def image_to_sequence(grid) -> PixelSequence:
    g = np.asarray(grid)
    if g.ndim != 2:
        raise DimensionError(f"expected a 2-D intensity grid, got shape {g.shape}")
    if g.size and (g.min() < 0 or g.max() > 255):
        raise DimensionError("pixel intensities must lie in 0-255")
    return PixelSequence(g.reshape(-1).astype(np.uint8), g.shape[0], g.shape[1])
