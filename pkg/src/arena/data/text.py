"""Byte-level text corpora and document pairs."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FormatError, ParseError
from ..tokens import TokenSequence

log = logging.getLogger(__name__)

BYTE_VOCAB = 256
PAD = 256  # same id the encoder assigns to padding for a 256-symbol vocabulary


@dataclass(frozen=True)
class ByteDocument:
    raw: bytes
    label: int
    source: str


def bytes_to_sequence(raw: bytes, max_len: int, source: str = "document") -> TokenSequence:
    """Bytes are their own ids; pad with PAD up to max_len, truncate (logged) beyond it."""
    if max_len < 1:
        raise ConfigError(f"max_len must be >= 1, got {max_len}")
    ids = np.frombuffer(raw, dtype=np.uint8).astype(np.int32)
    if ids.shape[0] > max_len:
        log.warning("truncating %s from %d to %d bytes", source, ids.shape[0], max_len)
        ids = ids[:max_len]
    n = ids.shape[0]
    out = np.full(max_len, PAD, dtype=np.int32)
    out[:n] = ids
    return TokenSequence(out, n)


def sequence_to_bytes(seq: TokenSequence) -> bytes:
    return seq.tokens.astype(np.uint8).tobytes()


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _label_of(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{where}: label {text!r} is not an integer") from None


def read_documents(path) -> list[ByteDocument]:
    """``<root>/<label>/<file>`` directories, or a TSV file of ``text<TAB>label`` lines."""
    path = Path(path)
    docs: list[ByteDocument] = []
    if path.is_dir():
        for label_dir in sorted(p for p in path.iterdir() if p.is_dir()):
            label = _label_of(label_dir.name, str(label_dir))
            for f in sorted(p for p in label_dir.rglob("*") if p.is_file()):
                docs.append(ByteDocument(_read(f), label, str(f)))
    elif path.is_file():
        for lineno, line in enumerate(_read(path).split(b"\n"), 1):
            if not line.strip():
                continue
            text, sep, label = line.rpartition(b"\t")
            if not sep:
                raise ParseError(f"{path}:{lineno}: expected text<TAB>label")
            docs.append(ByteDocument(text, _label_of(label.decode("ascii", "replace").strip(), f"{path}:{lineno}"),
                                     f"{path}:{lineno}"))
    else:
        raise OSError(f"cannot read {path}: no such file or directory")
    return docs


def load_text_corpus(path, max_len: int) -> list[tuple[TokenSequence, int]]:
    docs = read_documents(path)
    if not docs:
        raise FormatError(f"{path}: corpus is empty")
    return [(bytes_to_sequence(d.raw, max_len, d.source), d.label) for d in docs]


def load_pairs(path, max_len_per_doc: int) -> list[tuple[tuple[TokenSequence, TokenSequence], int]]:
    """TSV of ``doc1<TAB>doc2<TAB>label`` with label in {0, 1}."""
    path = Path(path)
    raw = _read(path)
    out = []
    for lineno, line in enumerate(raw.split(b"\n"), 1):
        if not line.strip():
            continue
        cols = line.rstrip(b"\r").split(b"\t")
        if len(cols) != 3:
            raise ParseError(f"{path}:{lineno}: expected 3 tab-separated columns, found {len(cols)}")
        label = cols[2].decode("ascii", "replace").strip()
        if label not in ("0", "1"):
            raise ParseError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
        where = f"{path}:{lineno}"
        out.append(((bytes_to_sequence(cols[0], max_len_per_doc, where + " doc1"),
                     bytes_to_sequence(cols[1], max_len_per_doc, where + " doc2")), int(label)))
    if not out:
        raise FormatError(f"{path}: no document pairs")
    return out


def write_pairs(path, pairs) -> Path:
    """Inverse of load_pairs for byte strings free of tabs and newlines."""
    path = Path(path)
    with open(path, "wb") as fh:
        for a, b, lbl in pairs:
            if any(ch in s for s in (a, b) for ch in (b"\t", b"\n")):
                raise FormatError("documents must not contain tabs or newlines in the pairs format")
            fh.write(a + b"\t" + b + b"\t" + str(int(lbl)).encode() + b"\n")
    return path
