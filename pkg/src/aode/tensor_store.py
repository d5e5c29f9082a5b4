"""Checkpoint container: in-memory model and the ``AODE`` binary file format.

Layout of a checkpoint file (all integers little-endian)::

    magic  b"AODE" | version u32 = 1 | tensor_count u64
    per tensor:   name_len u32 | name utf-8 | dtype u8 (0=F32, 1=F64)
                  | rank u32 | rank x dim u64 | payload (row-major IEEE-754 LE)
    metadata:     meta_count u64 | per entry: key_len u32 | key | val_len u32 | val

Nothing may follow the metadata block.
"""

from __future__ import annotations

import enum
import io
import math
import os
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MAGIC = b"AODE"
VERSION = 1

__all__ = [
    "MAGIC",
    "VERSION",
    "DType",
    "TensorRecord",
    "Checkpoint",
    "CompatReport",
    "CheckpointError",
    "BadMagic",
    "UnsupportedVersion",
    "TruncatedFile",
    "DuplicateName",
    "NonFiniteValue",
    "MalformedFile",
    "encode_checkpoint",
    "decode_checkpoint",
    "write_checkpoint",
    "read_checkpoint",
    "validate_compat",
]


class CheckpointError(Exception):
    """Base class for every checkpoint format or content error."""


class BadMagic(CheckpointError):
    pass


class UnsupportedVersion(CheckpointError):
    pass


class TruncatedFile(CheckpointError):
    pass


class DuplicateName(CheckpointError):
    pass


class NonFiniteValue(CheckpointError):
    pass


class MalformedFile(CheckpointError):
    """Structurally invalid content that is not covered by a narrower error."""


class DType(enum.IntEnum):
    F32 = 0
    F64 = 1

    @property
    def numpy(self) -> np.dtype:
        return np.dtype("<f4") if self is DType.F32 else np.dtype("<f8")

    @property
    def itemsize(self) -> int:
        return 4 if self is DType.F32 else 8

    @classmethod
    def of(cls, array: np.ndarray) -> "DType":
        if array.dtype == np.float32:
            return cls.F32
        if array.dtype == np.float64:
            return cls.F64
        raise TypeError(f"unsupported tensor dtype {array.dtype}; only float32/float64")


@dataclass(frozen=True)
class TensorRecord:
    name: str
    dtype: DType
    shape: tuple[int, ...]
    data: np.ndarray  # flat, little-endian, read-only


def _freeze(array: np.ndarray) -> np.ndarray:
    arr = np.array(array, copy=True)
    if arr.dtype not in (np.float32, np.float64):
        raise TypeError(f"unsupported tensor dtype {arr.dtype}; only float32/float64")
    arr = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
    arr.setflags(write=False)
    return arr


class Checkpoint:
    """Ordered, immutable collection of named float tensors plus string metadata.

    Tensors keep insertion order, which is also the on-disk order.
    """

    __slots__ = ("_tensors", "_metadata")

    def __init__(
        self,
        tensors: Mapping[str, np.ndarray] | Iterable[tuple[str, np.ndarray]],
        metadata: Mapping[str, str] | None = None,
    ) -> None:
        items = tensors.items() if isinstance(tensors, Mapping) else tensors
        frozen: dict[str, np.ndarray] = {}
        for name, array in items:
            if not isinstance(name, str) or not name:
                raise ValueError("tensor names must be non-empty strings")
            if name in frozen:
                raise DuplicateName(f"duplicate tensor name {name!r}")
            arr = _freeze(array)
            if any(d < 1 for d in arr.shape):
                raise ValueError(f"tensor {name!r} has a zero-sized dimension {arr.shape}")
            frozen[name] = arr
        meta = dict(metadata or {})
        for k, v in meta.items():
            if not isinstance(k, str) or not isinstance(v, str):
                raise TypeError("metadata keys and values must be strings")
        self._tensors = frozen
        self._metadata = meta

    @property
    def tensors(self) -> Mapping[str, np.ndarray]:
        return self._tensors

    @property
    def metadata(self) -> dict[str, str]:
        return dict(self._metadata)

    @property
    def names(self) -> list[str]:
        return list(self._tensors)

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: object) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def records(self) -> Iterator[TensorRecord]:
        for name, arr in self._tensors.items():
            yield TensorRecord(name, DType.of(arr), tuple(arr.shape), arr.reshape(-1))

    def with_metadata(self, **extra: str) -> "Checkpoint":
        meta = self.metadata
        meta.update(extra)
        return Checkpoint(self._tensors, meta)

    def equals(self, other: "Checkpoint", *, metadata: bool = True) -> bool:
        """Bit-exact comparison of names, order, dtypes, shapes and payload bytes."""
        if list(self._tensors) != list(other._tensors):
            return False
        for name, a in self._tensors.items():
            b = other._tensors[name]
            if a.dtype != b.dtype or a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return not metadata or self._metadata == other._metadata

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        return self.equals(other)

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        parts = ", ".join(f"{n}:{DType.of(a).name}{list(a.shape)}" for n, a in self._tensors.items())
        return f"Checkpoint({parts})"


# -- encoding ---------------------------------------------------------------

def _check_finite(ckpt: Checkpoint) -> None:
    for name, arr in ckpt.tensors.items():
        if not np.all(np.isfinite(arr)):
            raise NonFiniteValue(f"tensor {name!r} contains NaN or Inf; refusing to write")


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    _check_finite(ckpt)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<IQ", VERSION, len(ckpt)))
    for rec in ckpt.records():
        name = rec.name.encode("utf-8")
        buf.write(struct.pack("<I", len(name)))
        buf.write(name)
        buf.write(struct.pack("<BI", int(rec.dtype), len(rec.shape)))
        if rec.shape:
            buf.write(struct.pack(f"<{len(rec.shape)}Q", *rec.shape))
        buf.write(rec.data.astype(rec.dtype.numpy, copy=False).tobytes())
    meta = ckpt.metadata
    buf.write(struct.pack("<Q", len(meta)))
    for key, val in meta.items():
        kb, vb = key.encode("utf-8"), val.encode("utf-8")
        buf.write(struct.pack("<I", len(kb)))
        buf.write(kb)
        buf.write(struct.pack("<I", len(vb)))
        buf.write(vb)
    return buf.getvalue()


def write_checkpoint(ckpt: Checkpoint, path: str | os.PathLike) -> None:
    data = encode_checkpoint(ckpt)
    with open(path, "wb") as fh:
        fh.write(data)


# -- decoding ---------------------------------------------------------------

class _Cursor:
    def __init__(self, data: bytes) -> None:
        self.data = memoryview(data)
        self.pos = 0

    def take(self, n: int, what: str) -> memoryview:
        end = self.pos + n
        if n < 0 or end > len(self.data):
            raise TruncatedFile(
                f"file truncated reading {what}: need {n} bytes at offset {self.pos}, "
                f"{len(self.data) - self.pos} available"
            )
        chunk = self.data[self.pos:end]
        self.pos = end
        return chunk

    def unpack(self, fmt: str, what: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def text(self, n: int, what: str) -> str:
        raw = self.take(n, what)
        try:
            return bytes(raw).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFile(f"{what} is not valid UTF-8") from exc

    @property
    def remaining(self) -> int:
        return len(self.data) - self.pos


def decode_checkpoint(data: bytes, *, on_nonfinite: str = "error") -> Checkpoint:
    """Parse checkpoint bytes; every malformation raises a :class:`CheckpointError`.

    ``on_nonfinite`` is ``"error"`` (default) or ``"warn"``.
    """
    if on_nonfinite not in ("error", "warn"):
        raise ValueError("on_nonfinite must be 'error' or 'warn'")
    cur = _Cursor(data)
    if len(data) < 4 or bytes(cur.take(4, "magic")) != MAGIC:
        raise BadMagic("not an AODE checkpoint (bad magic)")
    (version,) = cur.unpack("<I", "version")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported checkpoint version {version}")
    (count,) = cur.unpack("<Q", "tensor count")

    tensors: dict[str, np.ndarray] = {}
    for index in range(count):
        (name_len,) = cur.unpack("<I", f"name length of tensor #{index}")
        name = cur.text(name_len, f"name of tensor #{index}")
        if not name:
            raise MalformedFile(f"tensor #{index} has an empty name")
        if name in tensors:
            raise DuplicateName(f"duplicate tensor name {name!r}")
        code, rank = cur.unpack("<BI", f"dtype/rank of {name!r}")
        try:
            dtype = DType(code)
        except ValueError:
            raise MalformedFile(f"tensor {name!r} has unknown dtype code {code}") from None
        # each dim costs 8 bytes; bound rank before allocating anything
        if rank * 8 > cur.remaining:
            raise TruncatedFile(f"file truncated reading shape of {name!r}")
        shape = cur.unpack(f"<{rank}Q", f"shape of {name!r}") if rank else ()
        if any(d < 1 for d in shape):
            raise MalformedFile(f"tensor {name!r} has a zero dimension in shape {list(shape)}")
        numel = math.prod(shape)
        payload = cur.take(numel * dtype.itemsize, f"payload of {name!r}")
        arr = np.frombuffer(payload, dtype=dtype.numpy).reshape(shape)
        if not np.all(np.isfinite(arr)):
            msg = f"tensor {name!r} contains NaN or Inf"
            if on_nonfinite == "error":
                raise NonFiniteValue(msg)
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
        tensors[name] = arr

    (meta_count,) = cur.unpack("<Q", "metadata count")
    meta: dict[str, str] = {}
    for index in range(meta_count):
        (klen,) = cur.unpack("<I", f"metadata key length #{index}")
        key = cur.text(klen, f"metadata key #{index}")
        (vlen,) = cur.unpack("<I", f"metadata value length #{index}")
        meta[key] = cur.text(vlen, f"metadata value #{index}")
    if cur.remaining:
        raise MalformedFile(f"{cur.remaining} trailing bytes after metadata block")
    return Checkpoint(tensors, meta)


def read_checkpoint(path: str | os.PathLike, *, on_nonfinite: str = "error") -> Checkpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    return decode_checkpoint(data, on_nonfinite=on_nonfinite)


# -- compatibility ----------------------------------------------------------

@dataclass
class CompatReport:
    mismatches: list[tuple[str, str]] = field(default_factory=list)

    @property
    def compatible(self) -> bool:
        return not self.mismatches

    def __str__(self) -> str:
        if self.compatible:
            return "compatible"
        return "; ".join(f"{name}: {reason}" for name, reason in self.mismatches)


def validate_compat(ckpts: Sequence[Checkpoint]) -> CompatReport:
    """Check that all checkpoints share names, shapes and dtypes.

    Each offending tensor name is reported once, with the first applicable
    reason in the order missing, shape, dtype.
    """
    if len(ckpts) < 2:
        raise ValueError("validate_compat needs at least two checkpoints")
    all_names: list[str] = []
    seen: set[str] = set()
    for ck in ckpts:
        for name in ck:
            if name not in seen:
                seen.add(name)
                all_names.append(name)
    report = CompatReport()
    for name in all_names:
        present = [ck[name] for ck in ckpts if name in ck]
        if len(present) != len(ckpts):
            report.mismatches.append((name, "missing"))
        elif len({a.shape for a in present}) > 1:
            report.mismatches.append((name, "shape"))
        elif len({a.dtype for a in present}) > 1:
            report.mismatches.append((name, "dtype"))
    return report
