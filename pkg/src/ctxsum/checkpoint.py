"""Binary checkpoint format for trained models.

Layout: magic "CTXS", uint32 version, model kind string, canonical
key=value config blob, then named float32 tensors (name, rank, dims,
little-endian raw data). Strings are uint32-length-prefixed UTF-8.
Round trips are bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import BadCheckpoint

MAGIC = b"CTXS"
VERSION = 1


@dataclass
class Checkpoint:
    model_kind: str
    config: dict[str, str] = field(default_factory=dict)
    tensors: dict[str, np.ndarray] = field(default_factory=dict)


def _write_str(fh, s: str) -> None:
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_str(fh) -> str:
    (n,) = struct.unpack("<I", _read_exact(fh, 4))
    return _read_exact(fh, n).decode("utf-8")


def _read_exact(fh, n: int) -> bytes:
    raw = fh.read(n)
    if len(raw) != n:
        raise BadCheckpoint("truncated checkpoint")
    return raw


def config_blob(config: dict[str, str]) -> str:
    return "".join(f"{k}={config[k]}\n" for k in sorted(config))


def parse_config_blob(blob: str) -> dict[str, str]:
    config = {}
    for line in blob.splitlines():
        if not line:
            continue
        key, _, value = line.partition("=")
        config[key] = value
    return config


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        _write_str(fh, ckpt.model_kind)
        _write_str(fh, config_blob(ckpt.config))
        fh.write(struct.pack("<I", len(ckpt.tensors)))
        for name in sorted(ckpt.tensors):
            tensor = np.ascontiguousarray(ckpt.tensors[name], dtype="<f4")
            _write_str(fh, name)
            fh.write(struct.pack("<I", tensor.ndim))
            fh.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            fh.write(tensor.tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        if _read_exact(fh, 4) != MAGIC:
            raise BadCheckpoint(f"{path}: bad magic")
        (version,) = struct.unpack("<I", _read_exact(fh, 4))
        if version != VERSION:
            raise BadCheckpoint(f"{path}: unsupported version {version}")
        model_kind = _read_str(fh)
        config = parse_config_blob(_read_str(fh))
        (count,) = struct.unpack("<I", _read_exact(fh, 4))
        tensors = {}
        for _ in range(count):
            name = _read_str(fh)
            (rank,) = struct.unpack("<I", _read_exact(fh, 4))
            shape = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read_exact(fh, 4 * size), dtype="<f4")
            tensors[name] = data.reshape(shape).copy()
        return Checkpoint(model_kind=model_kind, config=config, tensors=tensors)
