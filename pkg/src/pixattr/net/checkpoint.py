"""Versioned binary model checkpoints.

Layout: 8-byte magic, u32 little-endian header length, JSON header (model
kind, architecture, array shapes, user metadata), a little-endian float64
blob of all parameter and state arrays in model order, and a sha256 digest
of the blob. Loading rebuilds the architecture and verifies both shapes and
checksum, so silent corruption cannot produce a plausible model.
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .model import ArchitectureSpec, NeuralModel, SiameseModel

MAGIC = b"PXNET001"


class CheckpointError(ValueError):
    pass


def _arrays_of(model) -> list[np.ndarray]:
    return model.state_arrays()


def save_checkpoint(model, path, meta: dict | None = None) -> None:
    if isinstance(model, SiameseModel):
        kind = "siamese"
        spec_obj = {
            "encoder": model.encoder.spec.to_obj(),
            "classifier": model.classifier.spec.to_obj(),
        }
    elif isinstance(model, NeuralModel):
        kind = "predictor"
        spec_obj = model.spec.to_obj()
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    arrays = _arrays_of(model)
    header = {
        "kind": kind,
        "spec": spec_obj,
        "shapes": [list(a.shape) for a in arrays],
        "meta": meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in arrays)
    digest = hashlib.sha256(blob).digest()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(blob)
        fh.write(digest)


def _build_from_header(header, dtype):
    rng = np.random.default_rng(0)  # weights are overwritten from the blob
    if header["kind"] == "siamese":
        return SiameseModel(
            ArchitectureSpec.from_obj(header["spec"]["encoder"]),
            ArchitectureSpec.from_obj(header["spec"]["classifier"]),
            rng,
            dtype=dtype,
        )
    if header["kind"] == "predictor":
        return NeuralModel(ArchitectureSpec.from_obj(header["spec"]), rng, dtype=dtype)
    raise CheckpointError(f"unknown model kind {header['kind']!r}")


def load_checkpoint(path, dtype=np.float64):
    """Returns (model, meta); dtype picks the in-memory parameter precision."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(MAGIC) + 4 or not data.startswith(MAGIC):
        raise CheckpointError("bad magic")
    (header_len,) = struct.unpack_from("<I", data, len(MAGIC))
    header_start = len(MAGIC) + 4
    header_end = header_start + header_len
    if header_end + 32 > len(data):
        raise CheckpointError("truncated header")
    try:
        header = json.loads(data[header_start:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc
    model = _build_from_header(header, dtype)
    arrays = _arrays_of(model)
    shapes = [tuple(s) for s in header["shapes"]]
    if shapes != [a.shape for a in arrays]:
        raise CheckpointError("architecture does not match stored shapes")
    blob = data[header_end:-32]
    expected = sum(a.size for a in arrays) * 8
    if len(blob) != expected:
        raise CheckpointError(f"blob is {len(blob)} bytes, expected {expected}")
    if hashlib.sha256(blob).digest() != data[-32:]:
        raise CheckpointError("checksum mismatch")
    offset = 0
    for a in arrays:
        nbytes = a.size * 8
        a[...] = np.frombuffer(blob[offset : offset + nbytes], dtype="<f8").reshape(
            a.shape
        )
        offset += nbytes
    return model, header["meta"]
