"""Binary container for tensor trains and tensor train operators.

Layout (all integers little-endian)::

    magic       4 bytes   b"TTNC"
    version     uint32    FORMAT_VERSION
    kind        uint32    0 = TensorTrain, 1 = TensorTrainOperator
    ncores      uint32
    per core:
        ndim    uint32
        shape   ndim x uint64
    payload     for each core in order, its entries in row-major order as
                (real, imag) float64 pairs
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .exceptions import StructureError
from .tt import TensorTrain, TensorTrainOperator

MAGIC = b"TTNC"
FORMAT_VERSION = 1
_KINDS = {0: TensorTrain, 1: TensorTrainOperator}


def dumps(tn: TensorTrain | TensorTrainOperator) -> bytes:
    kind = 0 if isinstance(tn, TensorTrain) else 1
    parts = [MAGIC, struct.pack("<III", FORMAT_VERSION, kind, len(tn.cores))]
    for c in tn.cores:
        parts.append(struct.pack("<I", c.ndim))
        parts.append(struct.pack(f"<{c.ndim}Q", *c.shape))
    for c in tn.cores:
        parts.append(np.ascontiguousarray(c, dtype="<c16").tobytes())
    return b"".join(parts)


def loads(data: bytes) -> TensorTrain | TensorTrainOperator:
    if data[:4] != MAGIC:
        raise StructureError("not a tensor-train container (bad magic)")
    version, kind, ncores = struct.unpack_from("<III", data, 4)
    if version != FORMAT_VERSION:
        raise StructureError(f"unsupported container version {version}")
    if kind not in _KINDS:
        raise StructureError(f"unknown container kind {kind}")
    pos = 16
    shapes = []
    for _ in range(ncores):
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shapes.append(struct.unpack_from(f"<{ndim}Q", data, pos))
        pos += 8 * ndim
    cores = []
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<c16", count=count, offset=pos).reshape(shape)
        cores.append(arr.astype(np.complex128))
        pos += 16 * count
    if pos != len(data):
        raise StructureError(f"trailing bytes in container ({len(data) - pos})")
    return _KINDS[kind](cores)


def save(tn, path) -> None:
    Path(path).write_bytes(dumps(tn))


def load(path):
    return loads(Path(path).read_bytes())
