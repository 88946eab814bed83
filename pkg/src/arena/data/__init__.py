"""Loaders for byte-level text, document pairs, and CIFAR-10 binaries."""
from .cifar import (
    RECORD_BYTES, Cifar10Record, grayscale_values, load_cifar_sequences, parse_cifar10, parse_cifar10_bytes,
    to_grayscale, write_cifar10,
)
from .text import (
    PAD, ByteDocument, bytes_to_sequence, load_pairs, load_text_corpus, read_documents, sequence_to_bytes,
    write_pairs,
)

__all__ = [
    "PAD", "RECORD_BYTES", "ByteDocument", "Cifar10Record", "bytes_to_sequence", "grayscale_values",
    "load_cifar_sequences", "load_pairs", "load_text_corpus", "parse_cifar10", "parse_cifar10_bytes",
    "read_documents", "sequence_to_bytes", "to_grayscale", "write_cifar10", "write_pairs",
]
