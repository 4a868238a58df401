"""
``FSH1`` binary container shared by datasets, checkpoints and metrics.

Layout (all integers little-endian)::

    magic        4 bytes   b"FSH1"
    count        uint32    number of records
    per record:
      kind       uint8     0 dataset | 1 params | 2 metrics
      name_len   uint16
      name       name_len bytes, utf-8
      dtype      uint8     1 = float64 little-endian
      rank       uint8
      dims       rank x uint64
      payload    8 * prod(dims) bytes, C order
"""

import os
import struct
from collections.abc import Sequence
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ..errors import ContainerError, ContainerErrorCode
from ..utils.paths import atomic_write_bytes

MAGIC = b"FSH1"
DTYPE_F64_LE = 1


class RecordKind(IntEnum):
    DATASET = 0
    PARAMS = 1
    METRICS = 2


@dataclass
class Record:
    kind: RecordKind
    name: str
    array: np.ndarray

    def __repr__(self) -> str:
        return f"Record(kind={self.kind.name.lower()}, name={self.name}, shape={self.array.shape})"


def encode_container(records: Sequence[Record]) -> bytes:
    parts = [MAGIC, struct.pack("<I", len(records))]
    for record in records:
        array = np.asarray(record.array)
        if array.dtype.kind not in "fiub":
            raise ContainerError(
                f"record '{record.name}' is not numeric ({array.dtype})",
                ContainerErrorCode.DIM_MISMATCH,
            )
        payload = np.ascontiguousarray(array, dtype="<f8").tobytes(order="C")
        if len(payload) != 8 * int(np.prod(array.shape, dtype=np.int64)):
            raise ContainerError(
                f"record '{record.name}' payload does not match dims {array.shape}",
                ContainerErrorCode.DIM_MISMATCH,
            )
        name = record.name.encode("utf-8")
        parts.append(struct.pack("<BH", int(record.kind), len(name)))
        parts.append(name)
        parts.append(struct.pack("<BB", DTYPE_F64_LE, array.ndim))
        parts.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(payload)
    return b"".join(parts)


def write_container(path: str, records: Sequence[Record]) -> None:
    """
    Atomically write ``records`` to ``path``.

    Raises
    ------
    ContainerError
        ``DIM_MISMATCH`` for non-numeric payloads, ``UNWRITABLE`` when the
        destination cannot be written.
    """
    data = encode_container(records)
    try:
        atomic_write_bytes(path, data)
    except OSError as e:
        raise ContainerError(
            f"cannot write '{path}': {e}", ContainerErrorCode.UNWRITABLE
        ) from e


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise ContainerError(
                f"file ends inside {what} at byte {self.pos}",
                ContainerErrorCode.TRUNCATED_PAYLOAD,
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk


def decode_container(data: bytes) -> list[Record]:
    if data[:4] != MAGIC:
        raise ContainerError("not an FSH1 container", ContainerErrorCode.BAD_MAGIC)
    reader = _Reader(data)
    reader.take(4, "magic")
    (count,) = struct.unpack("<I", reader.take(4, "record count"))
    records = []
    for index in range(count):
        kind_code, name_len = struct.unpack("<BH", reader.take(3, "record header"))
        try:
            kind = RecordKind(kind_code)
        except ValueError:
            raise ContainerError(
                f"record {index} has unknown kind {kind_code}",
                ContainerErrorCode.UNKNOWN_KIND,
            ) from None
        name = reader.take(name_len, "record name").decode("utf-8")
        dtype, rank = struct.unpack("<BB", reader.take(2, "dtype and rank"))
        if dtype != DTYPE_F64_LE:
            raise ContainerError(
                f"record '{name}' has unknown dtype code {dtype}",
                ContainerErrorCode.UNKNOWN_DTYPE,
            )
        dims = struct.unpack(f"<{rank}Q", reader.take(8 * rank, "dims"))
        size = int(np.prod(dims, dtype=np.int64))
        payload = reader.take(8 * size, f"payload of '{name}'")
        array = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(dims)
        records.append(Record(kind=kind, name=name, array=array))
    return records


def read_container(path: str) -> list[Record]:
    """
    Read every record of an ``FSH1`` container.

    Raises
    ------
    FileNotFoundError
        If ``path`` does not exist.
    ContainerError
        ``BAD_MAGIC``, ``TRUNCATED_PAYLOAD``, ``UNKNOWN_KIND`` or
        ``UNKNOWN_DTYPE``.
    """
    if not os.path.exists(path):
        raise FileNotFoundError(f"Container file '{path}' not found.")
    with open(path, "rb") as f:
        data = f.read()
    return decode_container(data)


def records_by_name(records: Sequence[Record]) -> dict[str, Record]:
    return {r.name: r for r in records}
