import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arena.data import (
    PAD, Cifar10Record, bytes_to_sequence, grayscale_values, load_pairs, load_text_corpus, parse_cifar10,
    parse_cifar10_bytes, sequence_to_bytes, to_grayscale, write_cifar10,
)
from arena.errors import FormatError, ParseError


def test_bytes_example_and_truncation(caplog):
    s = bytes_to_sequence(b"ab", 4)
    assert s.ids.tolist() == [97, 98, PAD, PAD] and s.length == 2
    with caplog.at_level(logging.WARNING):
        long = bytes_to_sequence(b"x" * 5000, 4096, "doc")
    assert long.ids.shape == (4096,) and long.length == 4096
    assert "truncating doc" in caplog.text


@settings(max_examples=100, deadline=None)
@given(st.binary(max_size=300))
def test_byte_fidelity(raw):
    assert sequence_to_bytes(bytes_to_sequence(raw, 400)) == raw


def test_corpus_layouts(tmp_path):
    root = tmp_path / "corpus"
    for label, texts in (("0", [b"bad film", b"awful"]), ("1", [b"great \xff bytes"])):
        (root / label).mkdir(parents=True)
        for i, t in enumerate(texts):
            (root / label / f"{i}.txt").write_bytes(t)
    a, b = load_text_corpus(root, 16), load_text_corpus(root, 16)
    assert [x[1] for x in a] == [0, 0, 1]
    assert all(np.array_equal(x[0].ids, y[0].ids) for x, y in zip(a, b))
    assert sequence_to_bytes(a[2][0]) == b"great \xff bytes"
    tsv = tmp_path / "c.tsv"
    tsv.write_bytes(b"hello world\t1\nbye\t0\n")
    got = load_text_corpus(tsv, 8)
    assert [l for _, l in got] == [1, 0] and got[0][0].length == 8
    (tmp_path / "empty").mkdir()
    with pytest.raises(FormatError):
        load_text_corpus(tmp_path / "empty", 8)
    with pytest.raises(OSError, match="missing"):
        load_text_corpus(tmp_path / "missing", 8)


def test_pairs(tmp_path):
    p = tmp_path / "p.tsv"
    p.write_bytes(b"same doc\tsame doc\t1\n" + b"a" * 5000 + b"\t" + b"b" * 10 + b"\t0\n")
    pairs = load_pairs(p, 4096)
    (d1, d2), lbl = pairs[0]
    assert lbl == 1 and np.array_equal(d1.ids, d2.ids)
    (e1, e2), _ = pairs[1]
    assert e1.ids.shape[0] + e2.ids.shape[0] == 8192
    p.write_bytes(b"x\ty\t2\n")
    with pytest.raises(ParseError, match=":1:"):
        load_pairs(p, 8)
    p.write_bytes(b"x\t1\n")
    with pytest.raises(ParseError, match="3 tab-separated"):
        load_pairs(p, 8)


def _records(seed, n):
    r = np.random.default_rng(seed)
    return [Cifar10Record(int(r.integers(0, 10)), r.integers(0, 256, size=(3, 32, 32)).astype(np.uint8))
            for _ in range(n)]


def test_cifar_roundtrip_bit_exact(tmp_path):
    recs = _records(0, 2)
    path = write_cifar10(tmp_path / "batch.bin", recs)
    assert path.stat().st_size == 2 * 3073
    back = parse_cifar10(path)
    assert [r.label for r in back] == [r.label for r in recs]
    for a, b in zip(recs, back):
        assert a.pixels.tobytes() == b.pixels.tobytes()
    assert write_cifar10(tmp_path / "again.bin", back).read_bytes() == path.read_bytes()


def test_cifar_layout_is_channel_planar():
    raw = bytearray(3073)
    raw[0] = 3
    raw[1] = 10            # R at (0, 0)
    raw[1 + 1024 + 33] = 20  # G at (1, 1)
    raw[1 + 2048 + 1023] = 30  # B at (31, 31)
    (rec,) = parse_cifar10_bytes(bytes(raw))
    assert rec.label == 3 and rec.pixels[0, 0, 0] == 10 and rec.pixels[1, 1, 1] == 20 and rec.pixels[2, 31, 31] == 30


def test_cifar_full_batch_size_and_errors():
    data = b"".join(r.to_bytes() for r in _records(1, 10)) * 1000
    assert len(parse_cifar10_bytes(data)) == 10000
    with pytest.raises(FormatError, match="5 trailing"):
        parse_cifar10_bytes(data[:3073] + b"12345")
    bad = bytearray(3073)
    bad[0] = 10
    with pytest.raises(FormatError, match="label byte 10"):
        parse_cifar10_bytes(bytes(bad))


def test_grayscale_examples_and_range():
    assert grayscale_values(255, 255, 255) == 255
    assert grayscale_values(255, 0, 0) == 76
    assert grayscale_values(0, 0, 0) == 0
    ext = np.array(np.meshgrid([0, 255], [0, 255], [0, 255])).reshape(3, -1)
    rnd = np.random.default_rng(0).integers(0, 256, size=(3, 100_000))
    for r, g, b in (ext, rnd):
        v = grayscale_values(r, g, b).astype(int)
        ref = np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5 + 1e-9).astype(int)
        assert (v >= 0).all() and (v <= 255).all() and np.array_equal(v, ref)
    seq = to_grayscale(_records(2, 1)[0])
    assert len(seq) == 1024
