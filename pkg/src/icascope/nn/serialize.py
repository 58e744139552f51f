"""Binary model files.

Layout::

    b"ICASCOPE-MDL1"
    uint32 LE   header length
    header      UTF-8 JSON: spec, tensor table (name, shape), metadata
    payload     float32 LE tensors in declaration order (parameters, then
                batchnorm running statistics)
    32 bytes    SHA-256 of everything above
"""
import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import IoError
from .network import NetworkSpec, TrainedModel, param_shapes

MAGIC = b"ICASCOPE-MDL1"


class ModelFormatError(IoError):
    pass


def to_bytes(model: TrainedModel) -> bytes:
    pshapes, bshapes = param_shapes(model.spec)
    tensors = []
    chunks = []
    for name, shape in pshapes + bshapes:
        arr = model.params[name] if name in model.params else model.buffers[name]
        if tuple(arr.shape) != tuple(shape):
            raise ValueError(f"{name}: shape {arr.shape} does not match spec {shape}")
        tensors.append({"name": name, "shape": list(shape)})
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    header = json.dumps(
        {"spec": model.spec.to_dict(), "tensors": tensors, "metadata": model.metadata},
        sort_keys=True,
    ).encode()
    body = MAGIC + struct.pack("<I", len(header)) + header + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def from_bytes(blob: bytes) -> TrainedModel:
    if not blob.startswith(MAGIC):
        raise ModelFormatError("not a model file (bad magic)")
    if len(blob) < len(MAGIC) + 4 + 32:
        raise ModelFormatError("truncated model file")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ModelFormatError("checksum mismatch")
    off = len(MAGIC)
    (hlen,) = struct.unpack("<I", body[off:off + 4])
    off += 4
    header = json.loads(body[off:off + hlen].decode())
    off += hlen
    spec = NetworkSpec.from_dict(header["spec"])
    pshapes, bshapes = param_shapes(spec)
    expected = [(n, list(s)) for n, s in pshapes + bshapes]
    if [(t["name"], t["shape"]) for t in header["tensors"]] != expected:
        raise ModelFormatError("tensor table does not match the network spec")
    params, buffers = {}, {}
    for name, shape in pshapes + bshapes:
        n = int(np.prod(shape)) * 4
        arr = np.frombuffer(body, dtype="<f4", count=n // 4, offset=off).reshape(shape)
        off += n
        (params if name in dict(pshapes) else buffers)[name] = arr.astype(np.float32)
    if off != len(body):
        raise ModelFormatError("trailing bytes after the last tensor")
    return TrainedModel(spec, params, buffers, header["metadata"])


def save_model(model: TrainedModel, path) -> None:
    try:
        Path(path).write_bytes(to_bytes(model))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_model(path) -> TrainedModel:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return from_bytes(blob)


def checksum(model: TrainedModel) -> str:
    """Hex SHA-256 of the serialized model."""
    return to_bytes(model)[-32:].hex()
