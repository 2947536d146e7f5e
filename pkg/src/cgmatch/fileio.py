"""Embedding file formats.

Binary layout (little-endian throughout):

    magic   4 bytes  "CGET"
    version u16      currently 1
    flags   u16      bit 0: payload is a similarity matrix (d == n)
    n       u32      token count
    d       u32      embedding dim (== n for similarity payloads)
    payload n*d f32  row-major

A CSV fallback (one token per line, comma-separated reals) covers
hand-written fixtures; CSV always parses as token embeddings.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptyInput,
    FileFormatError,
    NonFinite,
    TruncatedPayload,
    UnsupportedVersion,
)
from .numerics import SimilarityMatrix, TokenMatrix

MAGIC = b"CGET"
VERSION = 1
FLAG_SIMILARITY = 0x0001

_HEADER = struct.Struct("<4sHHII")


def parse_embedding_file(data: bytes) -> TokenMatrix | SimilarityMatrix:
    """Parse binary bytes into tokens or a similarity matrix."""
    if len(data) < _HEADER.size:
        raise TruncatedPayload(
            f"file too short for header: {len(data)} < {_HEADER.size} bytes"
        )
    magic, version, flags, n, d = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(f"unsupported version {version}")
    if flags & ~FLAG_SIMILARITY:
        raise UnsupportedVersion(f"unknown flag bits 0x{flags:04x}")
    if n < 1 or d < 1:
        raise EmptyInput(f"header declares empty payload: n={n}, d={d}")
    expected = _HEADER.size + 4 * n * d
    if len(data) != expected:
        raise TruncatedPayload(
            f"payload length mismatch: file has {len(data)} bytes, header implies {expected}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(n, d)
    if not np.all(np.isfinite(values)):
        raise NonFinite("payload contains NaN or infinity")
    if flags & FLAG_SIMILARITY:
        if n != d:
            raise DimensionMismatch(f"similarity payload must be square, got {n}x{d}")
        return SimilarityMatrix(entries=values.astype(np.float64), diagonal_excluded=True)
    return TokenMatrix(values.astype(np.float64))


def serialize_embedding_file(obj: TokenMatrix | SimilarityMatrix) -> bytes:
    """Inverse of parse_embedding_file (values are stored as float32)."""
    if isinstance(obj, SimilarityMatrix):
        flags, payload = FLAG_SIMILARITY, obj.entries
    elif isinstance(obj, TokenMatrix):
        flags, payload = 0, obj.array
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    n, d = payload.shape
    header = _HEADER.pack(MAGIC, VERSION, flags, n, d)
    return header + np.ascontiguousarray(payload, dtype="<f4").tobytes()


def parse_csv_tokens(text: str) -> TokenMatrix:
    """Token matrix from comma-separated lines; blank lines are skipped."""
    rows: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            rows.append([float(cell) for cell in line.split(",")])
        except ValueError as exc:
            raise FileFormatError(f"line {lineno}: {exc}") from None
    if not rows:
        raise EmptyInput("no data rows in CSV input")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise FileFormatError(
                f"ragged CSV: row {lineno} has {len(row)} cells, expected {width}"
            )
    return TokenMatrix(np.array(rows, dtype=np.float64))


def sniff_payload(data: bytes) -> TokenMatrix | SimilarityMatrix:
    """Dispatch on the magic: binary if it matches, CSV text otherwise."""
    if data[:4] == MAGIC:
        return parse_embedding_file(data)
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise BadMagic("neither a binary embedding file nor UTF-8 CSV") from None
    return parse_csv_tokens(text)


def parse_importance(data: bytes, expected_n: int) -> np.ndarray:
    """One importance value per token, from a binary or CSV payload.

    Accepts an n x 1 (or 1 x n) matrix and flattens it; the length must
    match the token count of the accompanying input.
    """
    parsed = sniff_payload(data)
    values = parsed.entries if isinstance(parsed, SimilarityMatrix) else parsed.array
    flat = np.asarray(values, dtype=np.float64).reshape(-1)
    if flat.shape[0] != expected_n:
        raise DimensionMismatch(
            f"importance has {flat.shape[0]} values, input has {expected_n} tokens"
        )
    return flat
