import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cgmatch import (
    BadMagic,
    DimensionMismatch,
    EmptyInput,
    FileFormatError,
    NonFinite,
    SimilarityMatrix,
    TokenMatrix,
    TruncatedPayload,
    UnsupportedVersion,
    parse_csv_tokens,
    parse_embedding_file,
    serialize_embedding_file,
)
from cgmatch.fileio import FLAG_SIMILARITY, MAGIC, VERSION, parse_importance, sniff_payload

HEADER = struct.Struct("<4sHHII")


def tokens_bytes(arr, flags=0, magic=MAGIC, version=VERSION):
    a = np.asarray(arr, dtype="<f4")
    return HEADER.pack(magic, version, flags, a.shape[0], a.shape[1]) + a.tobytes()


def test_round_trip_tokens():
    t = TokenMatrix(np.array([[1.0, 2.5], [-3.0, 0.125]]))
    back = parse_embedding_file(serialize_embedding_file(t))
    assert isinstance(back, TokenMatrix)
    assert np.array_equal(back.array, t.array)  # values are f4-exact here


def test_round_trip_similarity_flag():
    s = SimilarityMatrix(np.array([[0.0, 0.5], [0.5, 0.0]]))
    data = serialize_embedding_file(s)
    _, _, flags, n, d = HEADER.unpack_from(data)
    assert flags & FLAG_SIMILARITY
    assert (n, d) == (2, 2)
    back = parse_embedding_file(data)
    assert isinstance(back, SimilarityMatrix)


def test_header_is_little_endian():
    t = TokenMatrix(np.array([[1.0, 2.0, 3.0]] * 2))
    data = serialize_embedding_file(t)
    assert data[:4] == b"CGET"
    assert data[4:6] == b"\x01\x00"  # version 1, little-endian u16
    assert struct.unpack("<I", data[8:12])[0] == 2  # n
    assert struct.unpack("<I", data[12:16])[0] == 3  # d


def test_bad_magic():
    with pytest.raises(BadMagic):
        parse_embedding_file(tokens_bytes(np.ones((2, 2)), magic=b"NOPE"))


def test_unsupported_version_and_flags():
    with pytest.raises(UnsupportedVersion):
        parse_embedding_file(tokens_bytes(np.ones((2, 2)), version=2))
    with pytest.raises(UnsupportedVersion):
        parse_embedding_file(tokens_bytes(np.ones((2, 2)), flags=0x0004))


def test_truncated_payloads():
    good = tokens_bytes(np.ones((3, 2)))
    with pytest.raises(TruncatedPayload):
        parse_embedding_file(good[:10])  # inside the header
    with pytest.raises(TruncatedPayload):
        parse_embedding_file(good[:-1])  # short body
    with pytest.raises(TruncatedPayload):
        parse_embedding_file(good + b"\x00")  # trailing garbage


def test_empty_and_nonfinite_rejected():
    with pytest.raises(EmptyInput):
        parse_embedding_file(HEADER.pack(MAGIC, VERSION, 0, 0, 4))
    bad = np.ones((2, 2), dtype="<f4")
    bad[0, 0] = np.nan
    with pytest.raises(NonFinite):
        parse_embedding_file(tokens_bytes(bad))


def test_similarity_must_be_square():
    data = tokens_bytes(np.ones((2, 3)), flags=FLAG_SIMILARITY)
    with pytest.raises(DimensionMismatch):
        parse_embedding_file(data)


def test_csv_parsing():
    t = parse_csv_tokens("1.0,2.0\n\n3.0,4.0\n")
    assert t.array.tolist() == [[1.0, 2.0], [3.0, 4.0]]
    with pytest.raises(FileFormatError):
        parse_csv_tokens("1.0,oops\n")
    with pytest.raises(FileFormatError):
        parse_csv_tokens("1.0,2.0\n3.0\n")  # ragged


def test_sniff_dispatches_on_magic():
    t = TokenMatrix(np.ones((2, 2)))
    assert isinstance(sniff_payload(serialize_embedding_file(t)), TokenMatrix)
    assert isinstance(sniff_payload(b"1.0,2.0\n3.0,4.0\n"), TokenMatrix)
    with pytest.raises(BadMagic):
        sniff_payload(b"\xff\xfe\x00garbage")


def test_parse_importance_shapes():
    imp = parse_importance(b"0.5\n0.25\n0.75\n", expected_n=3)
    assert imp.tolist() == [0.5, 0.25, 0.75]
    with pytest.raises(DimensionMismatch):
        parse_importance(b"0.5\n0.25\n", expected_n=3)


@settings(max_examples=40)
@given(
    hnp.arrays(
        np.float32,
        st.tuples(st.integers(1, 12), st.integers(1, 8)),
        elements=st.floats(min_value=-1e4, max_value=1e4, width=32),
    )
)
def test_round_trip_is_lossless_for_f32(arr):
    t = TokenMatrix(arr.astype(np.float64))
    back = parse_embedding_file(serialize_embedding_file(t))
    assert np.array_equal(back.array, t.array)
