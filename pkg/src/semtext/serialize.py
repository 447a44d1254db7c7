"""Self-describing binary weight files with named float64 sections.

Layout: 8-byte magic, little-endian u32 header length, a canonical JSON
header (kind, config, vocabulary hash, metadata, section table), then the
raw little-endian float64 tensors back to back in section-table order.
Writing is fully deterministic (sorted keys, sorted section names, no
timestamps), so re-training with the same seed reproduces identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"STXWGT01"


class ModelFormatError(ValueError):
    """Raised when a weight file fails structural validation."""


@dataclass(frozen=True)
class ModelFile:
    kind: str
    config: dict
    vocab_hash: str
    meta: dict
    tensors: dict[str, np.ndarray]


def save_model(path: str, kind: str, config: dict, vocab_hash: str,
               tensors: dict[str, np.ndarray], meta: dict | None = None) -> None:
    names = sorted(tensors)
    sections = []
    offset = 0
    for name in names:
        # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d
        arr = np.asarray(tensors[name], dtype=np.float64, order="C")
        sections.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
    header = {
        "kind": kind,
        "config": config,
        "vocab_hash": vocab_hash,
        "meta": meta or {},
        "sections": sections,
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for name in names:
            arr = np.asarray(tensors[name], dtype=np.float64, order="C")
            fh.write(arr.astype("<f8", copy=False).tobytes())


def load_model(path: str) -> ModelFile:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ModelFormatError(f"bad magic in {path!r}")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()
    tensors: dict[str, np.ndarray] = {}
    for sec in header["sections"]:
        shape = tuple(sec["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = sec["offset"]
        end = start + count * 8
        if end > len(payload):
            raise ModelFormatError(f"section {sec['name']!r} overruns payload")
        flat = np.frombuffer(payload[start:end], dtype="<f8")
        tensors[sec["name"]] = flat.reshape(shape).astype(np.float64)
    return ModelFile(header["kind"], header["config"], header["vocab_hash"],
                     header.get("meta", {}), tensors)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def vocab_fingerprint(words_in_token_order: list[str]) -> str:
    joined = "\x00".join(words_in_token_order).encode("utf-8")
    return hashlib.sha256(joined).hexdigest()
