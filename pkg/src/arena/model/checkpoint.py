"""Single-file checkpoints: magic, header length, JSON header, raw float32 LE data."""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import FormatError
from ..substrate import Tensor
from .config import EncoderConfig
from .encoder import ModelParams

MAGIC = b"ARENACK1"
_LE32 = np.dtype("<f4")


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> Path:
    path = Path(path)
    directory, offset = [], 0
    blobs = []
    for name in params.names:
        arr = np.ascontiguousarray(params[name].data, dtype=_LE32)
        directory.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {"config": params.config.to_dict(), "meta": params.meta, "tensors": directory,
              "dtype": "float32-le", "extra": extra or {}}
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)
    return path


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic)")
    if len(data) < 16:
        raise FormatError(f"{path}: truncated header")
    (hlen,) = struct.unpack("<Q", data[8:16])
    if 16 + hlen > len(data):
        raise FormatError(f"{path}: header length {hlen} runs past end of file")
    try:
        header = json.loads(data[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from exc
    body = memoryview(data)[16 + hlen:]
    tensors = {}
    for ent in header["tensors"]:
        end = ent["offset"] + ent["nbytes"]
        if end > len(body):
            raise FormatError(f"{path}: tensor {ent['name']} runs past end of file")
        arr = np.frombuffer(body[ent["offset"]:end], dtype=_LE32).reshape(ent["shape"])
        tensors[ent["name"]] = Tensor(arr.astype(np.float32))
    config = EncoderConfig.from_dict(header["config"])
    return ModelParams(config, tensors, header.get("meta", {})), header.get("extra", {})
