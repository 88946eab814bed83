"""Long-sequence attention benchmarking toolkit."""

__version__ = "0.1.0"
