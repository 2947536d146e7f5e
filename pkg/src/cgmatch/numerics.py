"""Core numeric types and kernels.

All heavy math runs on float64 numpy arrays. The wrapper types validate
shape and finiteness once at construction and freeze their buffers, so
downstream code can share instances across threads without copying.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NonFinite, TooFewTokens

# norm clamp for cosine denominators
NORM_EPS = 1e-12


def _as_readonly_f64(data, ndim: int, what: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{what}: expected {ndim}-D data, got {arr.ndim}-D")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{what}: all entries must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TokenMatrix:
    """A stack of token embeddings, one row per token."""

    array: np.ndarray

    def __post_init__(self) -> None:
        arr = _as_readonly_f64(self.array, 2, "TokenMatrix")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise EmptyInput("TokenMatrix: need at least one token and one dimension")
        object.__setattr__(self, "array", arr)

    @property
    def n_tokens(self) -> int:
        return self.array.shape[0]

    @property
    def dim(self) -> int:
        return self.array.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.array[i]


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Square pairwise similarity matrix.

    The diagonal is never meaningful for matching; ``diagonal_excluded``
    records that consumers must ignore it. Entries stay finite so the
    matrix serializes cleanly; exclusion is a flag, not a stored -inf.
    """

    entries: np.ndarray
    diagonal_excluded: bool = True

    def __post_init__(self) -> None:
        arr = _as_readonly_f64(self.entries, 2, "SimilarityMatrix")
        if arr.shape[0] != arr.shape[1]:
            raise DimensionMismatch(
                f"SimilarityMatrix: expected square entries, got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise EmptyInput("SimilarityMatrix: need at least one token")
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def off_diagonal_view(self) -> np.ndarray:
        """Writable copy with the diagonal forced to -inf."""
        out = self.entries.copy()
        np.fill_diagonal(out, -np.inf)
        return out


@dataclass(frozen=True, eq=False)
class Permutation:
    """A bijection on [0, n) stored as the visiting order."""

    indices: np.ndarray = field(default_factory=lambda: np.array([], dtype=np.int64))

    def __post_init__(self) -> None:
        arr = np.array(self.indices, dtype=np.int64, copy=True)
        if arr.ndim != 1:
            raise DimensionMismatch("Permutation: indices must be 1-D")
        n = arr.shape[0]
        if n and (arr.min() < 0 or arr.max() >= n or np.unique(arr).size != n):
            raise IndexError("Permutation: indices must be a bijection on [0, n)")
        arr.setflags(write=False)
        object.__setattr__(self, "indices", arr)

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __getitem__(self, k: int) -> int:
        return int(self.indices[k])

    def ranks(self) -> np.ndarray:
        """Inverse map: ranks()[token] = position of token in the order."""
        inv = np.empty(len(self), dtype=np.int64)
        inv[self.indices] = np.arange(len(self), dtype=np.int64)
        return inv


def cosine_similarity_matrix(keys: TokenMatrix) -> SimilarityMatrix:
    """Pairwise cosine similarity of token keys.

    Row norms are clamped below at 1e-12, so zero vectors yield zero
    similarity instead of NaN. Off-diagonal entries are clipped into
    [-1, 1] to absorb float round-off; the diagonal is flagged excluded.
    """
    if keys.n_tokens < 2:
        raise TooFewTokens("cosine_similarity_matrix: need at least 2 tokens")
    rows = keys.array
    norms = np.maximum(np.linalg.norm(rows, axis=1, keepdims=True), NORM_EPS)
    unit = rows / norms
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    return SimilarityMatrix(entries=sims, diagonal_excluded=True)


def stable_argsort_desc(values) -> Permutation:
    """Indices of ``values`` sorted descending, ties by ascending index.

    Accepts finite floats and -inf (-inf sorts last). Stability comes from
    sorting the negated values ascending with a stable sort, so equal
    values keep their original relative order.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch("stable_argsort_desc: expected 1-D values")
    if arr.size == 0:
        return Permutation(np.array([], dtype=np.int64))
    if np.any(np.isnan(arr)) or np.any(arr == np.inf):
        raise NonFinite("stable_argsort_desc: values must be finite or -inf")
    return Permutation(np.argsort(-arr, kind="stable"))


def softmax(values) -> np.ndarray:
    """Numerically stable softmax via max subtraction."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch("softmax: expected 1-D values")
    if arr.size == 0:
        raise EmptyInput("softmax: empty input")
    if not np.all(np.isfinite(arr)):
        raise NonFinite("softmax: values must be finite")
    shifted = np.exp(arr - arr.max())
    return shifted / shifted.sum()
