"""Bit-exact binary embedding tables and id-aligned joins against manifests.

File layout (all integers little-endian):
magic ``VQDE`` | u32 version=1 | u32 dim | u64 row_count | u16 name_len |
name bytes | per row: u16 id_len | id bytes | dim float32 values.
Vectors round-trip bitwise, including NaN payloads.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Dimension, Manifest, UtteranceRecord

log = logging.getLogger(__name__)

MAGIC = b"VQDE"
VERSION = 1

#: Expected embedding width for the known frozen backends.
KNOWN_BACKEND_DIMS = {
    "hubert-large": 1024,
    "hubert-large-asr": 1024,
    "clap": 784,
    "rawnet3": 192,
}


class EmbeddingStoreError(Exception):
    """Base class for embedding table format and join failures."""


class BadMagic(EmbeddingStoreError):
    pass


class UnsupportedVersion(EmbeddingStoreError):
    pass


class TruncatedFile(EmbeddingStoreError):
    pass


class TrailingData(EmbeddingStoreError):
    pass


class DuplicateId(EmbeddingStoreError):
    pass


class DimMismatch(EmbeddingStoreError):
    pass


class EmptyJoin(EmbeddingStoreError):
    pass


@dataclass(frozen=True)
class EmbeddingTable:
    """Ordered id -> float32 vector mapping for one embedding backend."""

    backend_name: str
    dim: int
    ids: tuple[str, ...]
    vectors: np.ndarray  # (n, dim) float32

    def __post_init__(self):
        if self.dim <= 0:
            raise DimMismatch(f"dim must be positive, got {self.dim}")
        vectors = np.asarray(self.vectors, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape != (len(self.ids), self.dim):
            raise DimMismatch(
                f"vectors shape {vectors.shape} does not match {len(self.ids)} rows x dim {self.dim}"
            )
        if len(set(self.ids)) != len(self.ids):
            raise DuplicateId("utterance ids must be unique within a table")
        expected = KNOWN_BACKEND_DIMS.get(self.backend_name)
        if expected is not None and expected != self.dim:
            raise DimMismatch(
                f"backend {self.backend_name!r} expects dim {expected}, table has {self.dim}"
            )
        object.__setattr__(self, "vectors", vectors)

    def __len__(self) -> int:
        return len(self.ids)

    def index(self) -> dict[str, int]:
        return {uid: i for i, uid in enumerate(self.ids)}


def write_table(table: EmbeddingTable, path) -> None:
    """Serialize a table to the VQDE binary layout."""
    name_bytes = table.backend_name.encode("utf-8")
    if len(name_bytes) > 0xFFFF:
        raise EmbeddingStoreError("backend name longer than 65535 bytes")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQH", VERSION, table.dim, len(table.ids), len(name_bytes)))
        fh.write(name_bytes)
        for i, uid in enumerate(table.ids):
            id_bytes = uid.encode("utf-8")
            if len(id_bytes) > 0xFFFF:
                raise EmbeddingStoreError(f"id longer than 65535 bytes: {uid[:32]!r}...")
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(table.vectors[i].tobytes())


def _read_exact(fh, count: int, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFile(f"file ended while reading {what} ({len(data)}/{count} bytes)")
    return data


def read_table(path) -> EmbeddingTable:
    """Read a VQDE file back into an EmbeddingTable, bit-exactly."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if len(magic) < 4 or magic != MAGIC:
            raise BadMagic(f"not a VQDE file: magic {magic!r}")
        version, dim, row_count, name_len = struct.unpack("<IIQH", _read_exact(fh, 18, "header"))
        if version != VERSION:
            raise UnsupportedVersion(f"unsupported version {version}")
        if dim == 0:
            raise DimMismatch("dim field is zero")
        name = _read_exact(fh, name_len, "backend name").decode("utf-8")

        ids: list[str] = []
        vectors = np.empty((row_count, dim), dtype=np.float32)
        seen: set[str] = set()
        vec_bytes = dim * 4
        for i in range(row_count):
            (id_len,) = struct.unpack("<H", _read_exact(fh, 2, f"id length of row {i}"))
            uid = _read_exact(fh, id_len, f"id of row {i}").decode("utf-8")
            if uid in seen:
                raise DuplicateId(f"duplicate id {uid!r} at row {i}")
            seen.add(uid)
            ids.append(uid)
            vectors[i] = np.frombuffer(_read_exact(fh, vec_bytes, f"vector of row {i}"), dtype="<f4")
        if fh.read(1):
            raise TrailingData("unexpected bytes after last row")

    return EmbeddingTable(backend_name=name, dim=dim, ids=tuple(ids), vectors=vectors)


@dataclass(frozen=True)
class DesignMatrix:
    """Feature matrix, targets, and ids for one probe training or evaluation set."""

    X: np.ndarray  # (n, dim) float64
    y: np.ndarray  # (n,) float64
    ids: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.ids)


def align_features(records, table: EmbeddingTable):
    """Feature rows for the given records, dropping (with a warning) ids absent
    from the table. Returns (X float64, kept_records) in record order."""
    idx = table.index()
    kept: list[UtteranceRecord] = []
    rows: list[int] = []
    missing = 0
    for r in records:
        at = idx.get(r.utterance_id)
        if at is None:
            missing += 1
            continue
        kept.append(r)
        rows.append(at)
    if missing:
        log.warning(
            "%d of %d records have no embedding in backend %r and were excluded",
            missing,
            len(list(records)) if not hasattr(records, "__len__") else len(records),
            table.backend_name,
        )
    X = table.vectors[rows].astype(np.float64) if rows else np.empty((0, table.dim))
    return X, kept


def join(
    manifest: Manifest,
    table: EmbeddingTable,
    dimension: Dimension,
    split=None,
    categories=None,
) -> DesignMatrix:
    """Design matrix for one dimension: records matching the filters, annotated
    for the dimension, and present in the table. Order follows the manifest."""
    filtered = manifest.filtered(split=split, categories=categories)
    annotated = [r for r in filtered.records if dimension in r.scores]
    X, kept = align_features(annotated, table)
    if not kept:
        raise EmptyJoin(
            f"no usable rows for dimension {dimension.value!r} with split={split} categories={categories}"
        )
    y = np.array([float(r.scores[dimension]) for r in kept])
    return DesignMatrix(X=X, y=y, ids=tuple(r.utterance_id for r in kept))
