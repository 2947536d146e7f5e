"""Cross-modal guidance: importance scoring and the alignment loss.

A learnable cross token summarizes the other modality. Its attention
query against token keys yields per-token importance; projecting the
vision and language cross tokens into a shared space and penalizing
their Jensen-Shannon divergence keeps the two summaries aligned.
Gradients flow only through the cross tokens, never the projections.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    LengthMismatch,
    MissingReference,
    NonFinite,
)
from .numerics import NORM_EPS, TokenMatrix, softmax

# floor inside logs so empty probability cells cannot produce -inf
LOG_FLOOR = 1e-12


class Modality(enum.Enum):
    VISION = "vision"
    LANGUAGE = "language"


class InitStrategy(enum.Enum):
    ZERO = "zero"
    NORMAL_RANDOM = "normal-random"
    UNIFORM_RANDOM = "uniform-random"
    INFORMATIVE = "informative"


@dataclass(frozen=True, eq=False)
class CrossToken:
    vector: np.ndarray
    layer_index: int = 0
    modality: Modality = Modality.VISION

    def __post_init__(self) -> None:
        vec = np.array(self.vector, dtype=np.float64, copy=True)
        if vec.ndim != 1:
            raise DimensionMismatch("CrossToken: vector must be 1-D")
        if not np.all(np.isfinite(vec)):
            raise NonFinite("CrossToken: vector must be finite")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def _weight(matrix, what: str) -> np.ndarray:
    w = np.array(matrix, dtype=np.float64, copy=True)
    if w.ndim != 2:
        raise DimensionMismatch(f"{what}: expected a 2-D weight matrix")
    if not np.all(np.isfinite(w)):
        raise NonFinite(f"{what}: weights must be finite")
    w.setflags(write=False)
    return w


@dataclass(frozen=True, eq=False)
class AttentionProjection:
    """Query/key projection weights for one layer."""

    w_query: np.ndarray
    w_key: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "w_query", _weight(self.w_query, "w_query"))
        object.__setattr__(self, "w_key", _weight(self.w_key, "w_key"))


@dataclass(frozen=True, eq=False)
class ProjectionPair:
    """Per-modality projections into the shared alignment space."""

    w_vision: np.ndarray
    w_language: np.ndarray

    def __post_init__(self) -> None:
        wv = _weight(self.w_vision, "w_vision")
        wl = _weight(self.w_language, "w_language")
        if wv.shape[1] != wl.shape[1]:
            raise DimensionMismatch(
                f"projection outputs differ: {wv.shape[1]} vs {wl.shape[1]}"
            )
        object.__setattr__(self, "w_vision", wv)
        object.__setattr__(self, "w_language", wl)


@dataclass(frozen=True)
class LossConfig:
    """Total-loss mixing weight.

    ``alpha`` scales the summed per-layer alignment losses; by convention
    it is tuned on a power-of-ten grid, but any non-negative value is
    accepted (zero disables guidance entirely).
    """

    alpha: float
    layer_count: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise NonFinite("LossConfig: alpha must be finite and >= 0")
        if self.layer_count < 1:
            raise LengthMismatch("LossConfig: layer_count must be >= 1")


def _cosine_to_rows(query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    qn = max(float(np.linalg.norm(query)), NORM_EPS)
    rn = np.maximum(np.linalg.norm(rows, axis=1), NORM_EPS)
    return np.clip((rows @ query) / (rn * qn), -1.0, 1.0)


def cross_importance(
    cross: CrossToken, proj: AttentionProjection, tokens: TokenMatrix
) -> np.ndarray:
    """Importance of each token: cosine of the cross query vs its key.

    I_i = cos(cross @ w_query, T_i @ w_key). High importance means the
    cross token attends to T_i, so T_i should resist being stacked.
    """
    if proj.w_query.shape[0] != cross.dim:
        raise DimensionMismatch(
            f"w_query expects dim {proj.w_query.shape[0]}, cross has {cross.dim}"
        )
    if proj.w_key.shape[0] != tokens.dim:
        raise DimensionMismatch(
            f"w_key expects dim {proj.w_key.shape[0]}, tokens have {tokens.dim}"
        )
    query = cross.vector @ proj.w_query
    keys = tokens.array @ proj.w_key
    if query.shape[0] != keys.shape[1]:
        raise DimensionMismatch("query and key projections disagree on output dim")
    return _cosine_to_rows(query, keys)


def attention_reuse_importance(
    proj: AttentionProjection, tokens: TokenMatrix
) -> np.ndarray:
    """Experimental importance without a cross token.

    Reuses the layer's own attention geometry: token i scores the mean
    over all tokens j of cos(Q_j, K_i), i.e. how much the sequence as a
    whole attends to i.
    """
    queries = tokens.array @ proj.w_query
    keys = tokens.array @ proj.w_key
    qn = np.maximum(np.linalg.norm(queries, axis=1, keepdims=True), NORM_EPS)
    kn = np.maximum(np.linalg.norm(keys, axis=1, keepdims=True), NORM_EPS)
    cos = np.clip((queries / qn) @ (keys / kn).T, -1.0, 1.0)
    return cos.mean(axis=0)


def _aligned_distributions(
    cross_vision: CrossToken, cross_language: CrossToken, pp: ProjectionPair
) -> tuple[np.ndarray, np.ndarray]:
    if pp.w_vision.shape[0] != cross_vision.dim:
        raise DimensionMismatch(
            f"w_vision expects dim {pp.w_vision.shape[0]}, got {cross_vision.dim}"
        )
    if pp.w_language.shape[0] != cross_language.dim:
        raise DimensionMismatch(
            f"w_language expects dim {pp.w_language.shape[0]}, got {cross_language.dim}"
        )
    p = softmax(cross_vision.vector @ pp.w_vision)
    q = softmax(cross_language.vector @ pp.w_language)
    return p, q


def _kl(p: np.ndarray, m: np.ndarray) -> float:
    return float(
        np.sum(p * (np.log(np.maximum(p, LOG_FLOOR)) - np.log(np.maximum(m, LOG_FLOOR))))
    )


def js_divergence_loss(
    cross_vision: CrossToken, cross_language: CrossToken, pp: ProjectionPair
) -> float:
    """Jensen-Shannon divergence between the projected cross tokens.

    Both projections are converted to distributions by softmax; the
    mixture is the pointwise mean of the two distributions. Symmetric,
    non-negative, and bounded above by ln 2.
    """
    p, q = _aligned_distributions(cross_vision, cross_language, pp)
    m = 0.5 * (p + q)
    # roundoff can leave a -1e-17 residue on near-identical inputs
    return max(0.0, 0.5 * _kl(p, m) + 0.5 * _kl(q, m))


def js_divergence_grad(
    cross_vision: CrossToken, cross_language: CrossToken, pp: ProjectionPair
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient of the loss w.r.t. both cross-token vectors.

    The projections are treated as constants (detached); differentiating
    the divergence through the softmax gives, for the vision side,
    dL/dlogits = p * (g - <g, p>) with g = 0.5 * log(p / m), then the
    chain rule through the fixed projection. Symmetric for language.
    """
    p, q = _aligned_distributions(cross_vision, cross_language, pp)
    m = 0.5 * (p + q)

    def logits_grad(dist: np.ndarray) -> np.ndarray:
        g = 0.5 * np.log(np.maximum(dist, LOG_FLOOR) / np.maximum(m, LOG_FLOOR))
        return dist * (g - float(g @ dist))

    grad_vision = logits_grad(p) @ pp.w_vision.T
    grad_language = logits_grad(q) @ pp.w_language.T
    return grad_vision, grad_language


def total_loss(original_loss: float, cfg: LossConfig, per_layer_js) -> float:
    """Original objective plus alpha times the summed alignment losses."""
    values = [float(v) for v in per_layer_js]
    if len(values) != cfg.layer_count:
        raise LengthMismatch(
            f"expected {cfg.layer_count} per-layer losses, got {len(values)}"
        )
    return float(original_loss) + cfg.alpha * float(np.sum(values))


def init_cross_token(
    strategy: InitStrategy,
    dim: int | None = None,
    reference: CrossToken | np.ndarray | None = None,
    seed: int = 0,
    layer_index: int = 0,
    modality: Modality = Modality.VISION,
) -> CrossToken:
    """Create a cross token by one of the supported strategies.

    Zero and the two random strategies need ``dim``; random draws come
    from a generator seeded with ``seed`` and are scaled into the usual
    +/-0.02 initialization band. Informative copies ``reference``.
    """
    if strategy is InitStrategy.INFORMATIVE:
        if reference is None:
            raise MissingReference("informative init requires a reference token")
        vec = reference.vector if isinstance(reference, CrossToken) else np.asarray(reference)
        return CrossToken(np.array(vec, dtype=np.float64), layer_index, modality)
    if dim is None or dim < 1:
        raise DimensionMismatch("init_cross_token: dim must be a positive integer")
    rng = np.random.default_rng(seed)
    if strategy is InitStrategy.ZERO:
        vec = np.zeros(dim)
    elif strategy is InitStrategy.NORMAL_RANDOM:
        vec = 0.02 * rng.standard_normal(dim)
    elif strategy is InitStrategy.UNIFORM_RANDOM:
        vec = rng.uniform(-0.02, 0.02, size=dim)
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown strategy {strategy}")
    return CrossToken(vec, layer_index, modality)
