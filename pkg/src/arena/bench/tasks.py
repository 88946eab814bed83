"""Task registry: vocabulary, class count, and dataset loading per task."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..data import load_pairs, load_text_corpus
from ..errors import ConfigError
from ..substrate import Rng
from ..tasks import VOCAB_SIZE, gen_listops, gen_pathfinder, read_listops_tsv, read_pixel_records, to_sequences
from ..tokens import TokenBatch, TokenSequence


@dataclass(frozen=True)
class TaskInfo:
    name: str
    vocab_size: int
    num_classes: int
    head_kind: str = "classify"


TASKS = {
    "listops": TaskInfo("listops", VOCAB_SIZE, 10),
    "text": TaskInfo("text", 256, 2),
    "matching": TaskInfo("matching", 256, 2, "match"),
    "image": TaskInfo("image", 256, 10),
    "pathfinder": TaskInfo("pathfinder", 256, 2),
}


def task_info(name: str) -> TaskInfo:
    try:
        return TASKS[name]
    except KeyError:
        raise ConfigError(f"unknown task {name!r}; expected one of {sorted(TASKS)}") from None


def load_task_data(name: str, path, max_len: int):
    """Labelled examples from a dataset file in the task's on-disk format."""
    task_info(name)
    path = Path(path)
    if name == "listops":
        out = []
        for seq, lbl in to_sequences(read_listops_tsv(path)):
            out.append((seq.truncate(max_len, f"{path} sample"), lbl))
        return out
    if name in ("image", "pathfinder"):
        return [(s.to_token_sequence().truncate(max_len, f"{path} image"), int(l)) for s, l in read_pixel_records(path)]
    if name == "text":
        return load_text_corpus(path, max_len)
    return load_pairs(path, max_len)


def synthetic_task_data(name: str, n: int, max_len: int, seed: int, **kw):
    """Generated datasets for the synthetic tasks (ListOps, Pathfinder)."""
    rng = Rng(seed)
    if name == "listops":
        return to_sequences(gen_listops(rng, max_len, kw.get("max_depth", 4), n, min_len=kw.get("min_len", 0),
                                        max_args=kw.get("max_args", 5), p_nest=kw.get("p_nest", 0.25)))
    if name == "pathfinder":
        size = 32 if max_len < 16384 else 128
        return [(s.to_token_sequence(), l) for s, l in gen_pathfinder(rng, size, n)]
    raise ConfigError(f"task {name!r} has no generator; pass a dataset path")


def random_batch(info: TaskInfo, batch: int, seq_len: int, rng: Rng):
    """Uniform random tokens of exactly ``seq_len``, for throughput and memory probes."""
    def seqs():
        return [TokenSequence.of(rng.integers(0, info.vocab_size, size=seq_len)) for _ in range(batch)]

    labels = np.asarray(rng.integers(0, info.num_classes, size=batch))
    if info.head_kind == "match":
        return (TokenBatch.stack(seqs()), TokenBatch.stack(seqs())), labels
    return TokenBatch.stack(seqs()), labels
