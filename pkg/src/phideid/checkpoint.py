"""Self-describing checkpoint container.

Layout: 8-byte magic, little-endian u64 header length, UTF-8 JSON header
(config, tag table, parameter ledger, tensor index, optional vocabulary and
metadata), then every tensor as row-major little-endian float32.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, InputError
from .labels import BIO_TAGS
from .model import ModelConfig, TaggerModel, count_parameters

MAGIC = b"PHIDCKPT"
FORMAT_VERSION = 1


def checkpoint_bytes(model: TaggerModel, vocab_tokens: list[str] | None = None, meta: dict | None = None) -> bytes:
    ledger = count_parameters(model.config)
    index, blobs, offset = [], [], 0
    for name, arr in model.params.items():
        data = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        index.append({"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = {
        "format": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "tags": list(BIO_TAGS),
        "ledger": [[k, n] for k, n in ledger.entries],
        "ledger_total": ledger.total,
        "tensors": index,
        "vocab": vocab_tokens,
        "meta": meta or {},
    }
    raw = json.dumps(header, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(raw)) + raw + b"".join(blobs)


def save_checkpoint(path: str | Path, model: TaggerModel, vocab_tokens: list[str] | None = None,
                    meta: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(checkpoint_bytes(model, vocab_tokens, meta))
    tmp.replace(path)
    return path


def load_checkpoint(path: str | Path) -> tuple[TaggerModel, dict]:
    """Return the model (float32) and the decoded header."""
    blob = Path(path).read_bytes()
    if blob[:8] != MAGIC:
        raise InputError(f"{path}: not a phideid checkpoint")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    header = json.loads(blob[16:16 + hlen].decode("utf-8"))
    if header.get("format") != FORMAT_VERSION:
        raise InputError(f"{path}: unsupported checkpoint format {header.get('format')}")
    if header["tags"] != list(BIO_TAGS):
        raise ConfigError(f"{path}: tag table differs from this build")
    config = ModelConfig.from_dict(header["config"])
    ledger = count_parameters(config)
    if [[k, n] for k, n in ledger.entries] != header["ledger"]:
        raise InputError(f"{path}: parameter ledger does not match the stored config")
    body = blob[16 + hlen:]
    need = sum(t["nbytes"] for t in header["tensors"])
    if len(body) != need:
        raise InputError(f"{path}: tensor data is {len(body)} bytes, header describes {need}")
    params = {}
    for t in header["tensors"]:
        arr = np.frombuffer(body, dtype="<f4", count=t["nbytes"] // 4, offset=t["offset"])
        params[t["name"]] = arr.reshape(t["shape"]).astype(np.float32)
    stored = sum(int(a.size) for a in params.values())
    if stored != ledger.total:
        raise InputError(f"{path}: {stored} stored parameters, ledger says {ledger.total}")
    return TaggerModel(config, params), header
