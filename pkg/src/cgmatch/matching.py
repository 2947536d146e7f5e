"""Complete-graph soft matching with a priority dependency mask.

Every token may stack onto every other token; a priority mask derived
from row/column similarity maxima breaks the resulting dependency cycles
(a token that absorbs others may not itself be absorbed by a lower
priority token). Sources are chosen by their best masked similarity,
optionally discounted by a cross-token importance score, and each source
stacks onto its best admissible destination.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    MissingImportance,
    ReductionTooLarge,
)
from .numerics import (
    SimilarityMatrix,
    TokenMatrix,
    cosine_similarity_matrix,
    softmax,
    stable_argsort_desc,
)


class EnsembleMode(enum.Enum):
    AVERAGE = "average"
    IMPORTANCE_SOFTMAX = "importance-softmax"


@dataclass(frozen=True, eq=False)
class ReductionOptions:
    """Knobs for one reduction step.

    ``importance`` switches on cross-guided source selection (scores are
    discounted by importance so informative tokens survive). Protected
    indices never appear in a pair, as source or destination.
    """

    importance: np.ndarray | None = None
    ensemble_mode: EnsembleMode = EnsembleMode.AVERAGE
    protected_indices: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        if self.importance is not None:
            imp = np.array(self.importance, dtype=np.float64, copy=True)
            if imp.ndim != 1:
                raise DimensionMismatch("ReductionOptions: importance must be 1-D")
            if not np.all(np.isfinite(imp)):
                raise DimensionMismatch("ReductionOptions: importance must be finite")
            imp.setflags(write=False)
            object.__setattr__(self, "importance", imp)
        elif self.ensemble_mode is EnsembleMode.IMPORTANCE_SOFTMAX:
            raise MissingImportance(
                "importance-softmax ensembling requires importance values"
            )
        object.__setattr__(self, "protected_indices", frozenset(self.protected_indices))


@dataclass(frozen=True, eq=False)
class PriorityMaskedSimilarity:
    """Similarity matrix plus the priority ranks that define its mask.

    ``row_rank[i]`` is the position of token i when tokens are ordered by
    their best outgoing similarity, descending; ``col_rank`` likewise for
    incoming. Entry (i, j) survives the mask only when row_rank[i] <
    col_rank[j] and i != j, which is exactly the strict lower-triangle
    exclusion after sorting rows and columns by priority.
    """

    base: SimilarityMatrix
    row_rank: np.ndarray
    col_rank: np.ndarray
    masked_entries: np.ndarray

    def masked(self, i: int, j: int) -> float:
        return float(self.masked_entries[i, j])

    @property
    def n(self) -> int:
        return self.base.n


def priority_mask(sim: SimilarityMatrix) -> PriorityMaskedSimilarity:
    """Build the dependency mask from row/column similarity maxima."""
    work = sim.off_diagonal_view()
    row_rank = stable_argsort_desc(work.max(axis=1)).ranks()
    col_rank = stable_argsort_desc(work.max(axis=0)).ranks()
    blocked = row_rank[:, None] >= col_rank[None, :]
    masked = sim.entries.copy()
    masked[blocked] = -np.inf
    np.fill_diagonal(masked, -np.inf)
    masked.setflags(write=False)
    return PriorityMaskedSimilarity(
        base=sim, row_rank=row_rank, col_rank=col_rank, masked_entries=masked
    )


@dataclass(frozen=True)
class MatchPlan:
    """r disjoint (source, destination) pairs over n tokens.

    Sources are pairwise distinct and no source is a destination;
    destinations may repeat, so stacks deeper than two are possible.
    """

    n: int
    pairs: tuple[tuple[int, int], ...]
    degenerate_fallbacks: int = 0

    def __post_init__(self) -> None:
        sources = [s for s, _ in self.pairs]
        dests = [d for _, d in self.pairs]
        for s, d in self.pairs:
            if not (0 <= s < self.n and 0 <= d < self.n):
                raise IndexOutOfRange(f"MatchPlan: pair ({s}, {d}) out of range")
            if s == d:
                raise IndexOutOfRange(f"MatchPlan: token {s} cannot stack onto itself")
        if len(set(sources)) != len(sources):
            raise IndexOutOfRange("MatchPlan: duplicate source")
        if set(sources) & set(dests):
            raise IndexOutOfRange("MatchPlan: a source is also a destination")

    @property
    def r(self) -> int:
        return len(self.pairs)

    @property
    def source_set(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.pairs)


@dataclass(frozen=True)
class StackSet:
    """Partition of [0, n) into output groups, one row per group.

    Groups are ordered by their smallest member; the group index is the
    representative slot of those tokens in the reduced output.
    """

    n: int
    stacks: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        seen: list[int] = []
        for group in self.stacks:
            if not group:
                raise IndexOutOfRange("StackSet: empty group")
            if list(group) != sorted(group):
                raise IndexOutOfRange("StackSet: group members must be ascending")
            seen.extend(group)
        if sorted(seen) != list(range(self.n)):
            raise IndexOutOfRange("StackSet: groups must partition [0, n)")
        mins = [g[0] for g in self.stacks]
        if mins != sorted(mins):
            raise IndexOutOfRange("StackSet: groups must be ordered by smallest member")

    @property
    def n_groups(self) -> int:
        return len(self.stacks)

    def slot_of(self, token: int) -> int:
        """Output row index of the group containing ``token``."""
        for slot, group in enumerate(self.stacks):
            if token in group:
                return slot
        raise IndexOutOfRange(f"StackSet: token {token} not in any group")


def select_match_plan(
    pm: PriorityMaskedSimilarity, r: int, opts: ReductionOptions | None = None
) -> MatchPlan:
    """Pick r sources by best masked similarity and assign destinations.

    Selection score of token i is max_j masked(i, j), minus its importance
    when importance is supplied. The r highest-scoring unprotected tokens
    become sources; each source stacks onto its best masked destination
    among unprotected non-sources. A source whose masked row is all -inf
    over the candidates falls back to the best unmasked similarity over
    the same candidates (counted in ``degenerate_fallbacks``). All ties
    break toward the lowest index.

    Feasibility requires r <= (eligible tokens) - 1: destinations may be
    shared, so late layers can run r past half the remaining tokens.
    """
    opts = opts or ReductionOptions()
    n = pm.n
    protected = opts.protected_indices
    for p in protected:
        if not (0 <= p < n):
            raise IndexOutOfRange(f"protected index {p} out of range for n={n}")
    n_eligible = n - len(protected)
    if r < 0:
        raise ReductionTooLarge("r must be non-negative")
    if r > max(n_eligible - 1, 0):
        raise ReductionTooLarge(
            f"r={r} exceeds the {max(n_eligible - 1, 0)} feasible for "
            f"n={n} with {len(protected)} protected"
        )
    if r == 0:
        return MatchPlan(n=n, pairs=())

    scores = pm.masked_entries.max(axis=1)
    if opts.importance is not None:
        if opts.importance.shape[0] != n:
            raise DimensionMismatch(
                f"importance length {opts.importance.shape[0]} != n={n}"
            )
        scores = scores - opts.importance

    order = stable_argsort_desc(scores).indices
    sources = [int(i) for i in order if int(i) not in protected][:r]
    source_set = set(sources)

    candidates = np.array(
        [j for j in range(n) if j not in source_set and j not in protected],
        dtype=np.int64,
    )
    base = pm.base.entries
    fallbacks = 0
    pairs: list[tuple[int, int]] = []
    for i in sources:
        row = pm.masked_entries[i, candidates]
        if np.all(np.isneginf(row)):
            row = base[i, candidates]  # unmasked rescue keeps large-r schedules alive
            fallbacks += 1
        dest = int(candidates[int(np.argmax(row))])
        pairs.append((i, dest))
    return MatchPlan(n=n, pairs=tuple(pairs), degenerate_fallbacks=fallbacks)


def build_stacks(plan: MatchPlan) -> StackSet:
    """Union pairs into connected groups; untouched tokens stay singletons."""
    parent = list(range(plan.n))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s, d in plan.pairs:
        parent[find(s)] = find(d)

    groups: dict[int, list[int]] = {}
    for tok in range(plan.n):
        groups.setdefault(find(tok), []).append(tok)
    ordered = sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])
    return StackSet(n=plan.n, stacks=tuple(tuple(g) for g in ordered))


def ensemble_stacks(
    tokens: TokenMatrix, stacks: StackSet, opts: ReductionOptions | None = None
) -> TokenMatrix:
    """Collapse each group to one row by averaging or importance softmax."""
    opts = opts or ReductionOptions()
    if tokens.n_tokens != stacks.n:
        raise DimensionMismatch(
            f"tokens n={tokens.n_tokens} does not match stacks n={stacks.n}"
        )
    use_importance = opts.ensemble_mode is EnsembleMode.IMPORTANCE_SOFTMAX
    if use_importance and opts.importance.shape[0] != stacks.n:
        raise DimensionMismatch(
            f"importance length {opts.importance.shape[0]} != n={stacks.n}"
        )
    out = np.empty((stacks.n_groups, tokens.dim), dtype=np.float64)
    for slot, group in enumerate(stacks.stacks):
        rows = tokens.array[list(group)]
        if use_importance:
            weights = softmax(opts.importance[list(group)])
            out[slot] = weights @ rows
        else:
            out[slot] = rows.mean(axis=0)
    return TokenMatrix(out)


def reduce_tokens(
    tokens: TokenMatrix,
    keys: TokenMatrix | SimilarityMatrix,
    r: int,
    opts: ReductionOptions | None = None,
) -> tuple[TokenMatrix, MatchPlan, float]:
    """One complete reduction step: mask, select, stack, ensemble.

    ``keys`` is either a key matrix (cosine similarity is computed) or a
    precomputed similarity matrix. Returns the reduced tokens, the plan,
    and the objective: the sum of unmasked base similarity over the
    plan's pairs.
    """
    opts = opts or ReductionOptions()
    if isinstance(keys, SimilarityMatrix):
        sim = keys
    else:
        if keys.n_tokens != tokens.n_tokens:
            raise DimensionMismatch(
                f"keys n={keys.n_tokens} does not match tokens n={tokens.n_tokens}"
            )
        sim = cosine_similarity_matrix(keys)
    if sim.n != tokens.n_tokens:
        raise DimensionMismatch(
            f"similarity n={sim.n} does not match tokens n={tokens.n_tokens}"
        )
    plan = select_match_plan(priority_mask(sim), r, opts)
    stacks = build_stacks(plan)
    reduced = ensemble_stacks(tokens, stacks, opts)
    score = float(sum(sim.entries[s, d] for s, d in plan.pairs))
    return reduced, plan, score
