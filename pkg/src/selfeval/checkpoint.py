"""Checkpoint file: JSON header plus a little-endian float32 weight blob.

Layout: 8-byte magic, uint32 header length, UTF-8 JSON header, then the
concatenated parameters in canonical order.  Loading a saved file and
saving it again reproduces the bytes exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .denoisers import MlpDenoiser
from .errors import DataError
from .schedule import NoiseSchedule

MAGIC = b"SELFEVL1"
FORMAT_VERSION = 1


def save_checkpoint(path, model: MlpDenoiser, sched: NoiseSchedule, vocabulary: dict,
                    extra: dict | None = None) -> None:
    header = {
        "version": FORMAT_VERSION,
        "arch": model.arch_json(),
        "schedule": sched.to_json_dict(),
        "conditionVocabulary": vocabulary,
    }
    if extra:
        header.update(extra)
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(
        np.ascontiguousarray(p, dtype="<f4").tobytes() for p in model.parameters()
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)


def load_checkpoint(path) -> tuple[MlpDenoiser, NoiseSchedule, dict]:
    """Rebuild the model, schedule and header; weights are bit-exact."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4 or data[: len(MAGIC)] != MAGIC:
        raise DataError(f"not a selfeval checkpoint (bad magic): {path}")
    header_len = struct.unpack("<I", data[len(MAGIC) : len(MAGIC) + 4])[0]
    body_start = len(MAGIC) + 4 + header_len
    if len(data) < body_start:
        raise DataError(f"truncated checkpoint header: {path}")
    try:
        header = json.loads(data[len(MAGIC) + 4 : body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"corrupt checkpoint header: {exc}") from exc
    if header.get("version") != FORMAT_VERSION:
        raise DataError(f"unsupported checkpoint version {header.get('version')}")
    arch = header["arch"]
    model = MlpDenoiser(
        dim=arch["dim"],
        hidden=tuple(arch["hidden"]),
        t_embed_dim=arch["tEmbedDim"],
        cond_dim=arch["condDim"],
        seed=arch.get("initSeed", 0),
        parameterization=arch.get("parameterization", "x0"),
    )
    blob = np.frombuffer(data[body_start:], dtype="<f4")
    params = model.parameters()
    expected = sum(p.size for p in params)
    if blob.size != expected:
        raise DataError(
            f"checkpoint weight blob has {blob.size} floats, expected {expected}"
        )
    offset = 0
    loaded = []
    for p in params:
        loaded.append(blob[offset : offset + p.size].reshape(p.shape))
        offset += p.size
    model.set_parameters(loaded)
    sched = NoiseSchedule.from_json_dict(header["schedule"])
    return model, sched, header
