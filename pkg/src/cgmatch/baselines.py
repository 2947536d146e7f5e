"""Reduction baselines: bipartite, greedy, k-means, random, exhaustive.

These share the MatchPlan/StackSet contract with the complete-graph
matcher so reports and analysis treat every method uniformly.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import InstanceTooLarge, ReductionTooLarge
from .matching import MatchPlan, StackSet
from .numerics import NORM_EPS, SimilarityMatrix, TokenMatrix, stable_argsort_desc


def bipartite_soft_match(sim: SimilarityMatrix, r: int) -> MatchPlan:
    """Alternating-split soft matching.

    Tokens at even positions form the source side, odd positions the
    destination side. Each even token keeps only its single best edge
    into the odd side; the r largest such edges become the plan. Ties
    break toward the lowest index on both sides.
    """
    n = sim.n
    if r < 0 or r > n // 2:
        raise ReductionTooLarge(f"bipartite: r={r} outside [0, {n // 2}] for n={n}")
    if r == 0:
        return MatchPlan(n=n, pairs=())
    evens = np.arange(0, n, 2)
    odds = np.arange(1, n, 2)
    across = sim.entries[np.ix_(evens, odds)]
    best_col = across.argmax(axis=1)  # first max wins: lowest odd index
    best_val = across[np.arange(len(evens)), best_col]
    keep = stable_argsort_desc(best_val).indices[:r]
    pairs = tuple(
        (int(evens[k]), int(odds[best_col[k]])) for k in keep
    )
    return MatchPlan(n=n, pairs=pairs)


def greedy_match(sim: SimilarityMatrix, r: int) -> MatchPlan:
    """Repeatedly take the globally largest admissible edge.

    An edge (i, j) is admissible while i has not been used as a source or
    destination and j is not a source. Chosen sources drop out of future
    destination candidacy. Ties break row-major, so the lowest (i, j)
    wins. Cost is O(r * n^2).
    """
    n = sim.n
    if r < 0 or r > n // 2:
        raise ReductionTooLarge(f"greedy: r={r} outside [0, {n // 2}] for n={n}")
    work = sim.off_diagonal_view()
    pairs: list[tuple[int, int]] = []
    for _ in range(r):
        flat = int(np.argmax(work))
        i, j = divmod(flat, n)
        if np.isneginf(work[i, j]):
            raise ReductionTooLarge(f"greedy: no admissible edge left for r={r}")
        pairs.append((i, j))
        work[i, :] = -np.inf   # i used as source
        work[:, i] = -np.inf   # i leaves destination candidacy
        work[j, :] = -np.inf   # j used as destination, cannot become a source
    return MatchPlan(n=n, pairs=tuple(pairs))


def random_match(n: int, r: int, seed: int = 0) -> MatchPlan:
    """Uniform sources, each with a uniform destination outside the sources."""
    if r < 0 or r > max(n - 1, 0):
        raise ReductionTooLarge(f"random: r={r} outside [0, {max(n - 1, 0)}] for n={n}")
    if r == 0:
        return MatchPlan(n=n, pairs=())
    rng = np.random.default_rng(seed)
    sources = rng.choice(n, size=r, replace=False)
    rest = np.setdiff1d(np.arange(n), sources)
    dests = rng.choice(rest, size=r, replace=True)
    return MatchPlan(n=n, pairs=tuple((int(s), int(d)) for s, d in zip(sources, dests)))


def kmeans_match(
    keys: TokenMatrix, r: int, iterations: int = 10, seed: int = 0
) -> StackSet:
    """Cluster keys into n - r groups by cosine distance (Lloyd updates).

    Centroids start from the first n - r tokens of a seeded shuffle.
    Assignment ties break toward the lowest cluster index; a cluster that
    empties is reseeded to the point currently farthest from its own
    centroid. Returns the clusters as stacks.
    """
    n = keys.n_tokens
    if r < 0 or r > n - 1:
        raise ReductionTooLarge(f"kmeans: r={r} outside [0, {n - 1}] for n={n}")
    if iterations < 1:
        raise ValueError("kmeans: iterations must be >= 1")
    k = n - r
    if k == n:
        return StackSet(n=n, stacks=tuple((i,) for i in range(n)))

    def unit(rows: np.ndarray) -> np.ndarray:
        norms = np.maximum(np.linalg.norm(rows, axis=1, keepdims=True), NORM_EPS)
        return rows / norms

    points = unit(keys.array)
    rng = np.random.default_rng(seed)
    centroids = keys.array[rng.permutation(n)[:k]].copy()

    assign = np.zeros(n, dtype=np.int64)
    for _ in range(iterations):
        sims = points @ unit(centroids).T
        assign = sims.argmax(axis=1)  # first max: lowest cluster index
        own = sims[np.arange(n), assign]
        counts = np.bincount(assign, minlength=k)
        for c in range(k):
            if counts[c] > 0:
                continue
            # reseed with the worst-fitting point from a cluster that can spare one
            order = np.argsort(own, kind="stable")
            point = next(int(p) for p in order if counts[assign[p]] >= 2)
            counts[assign[point]] -= 1
            counts[c] += 1
            assign[point] = c
            centroids[c] = keys.array[point]
        for c in range(k):
            members = assign == c
            if np.any(members):
                centroids[c] = keys.array[members].mean(axis=0)

    groups: dict[int, list[int]] = {}
    for tok in range(n):
        groups.setdefault(int(assign[tok]), []).append(tok)
    ordered = sorted(groups.values(), key=lambda g: g[0])
    return StackSet(n=n, stacks=tuple(tuple(g) for g in ordered))


# guard rails: combinations(12, 4) source sets stay enumerable in well under a second
ORACLE_MAX_N = 12
ORACLE_MAX_R = 4


def exhaustive_optimal(sim: SimilarityMatrix, r: int) -> tuple[MatchPlan, float]:
    """Brute-force the best plan over every source set.

    For a fixed source set the per-source destination choices are
    independent, so the optimum is the sum of each source row's maximum
    over the complement. Enumerating all source sets is exact. Ties keep
    the first source set in lexicographic order and the lowest
    destination index per source.
    """
    n = sim.n
    if n > ORACLE_MAX_N or r > ORACLE_MAX_R:
        raise InstanceTooLarge(
            f"oracle: n={n}, r={r} beyond guard (n <= {ORACLE_MAX_N}, r <= {ORACLE_MAX_R})"
        )
    if r < 0 or r > max(n - 1, 0):
        raise ReductionTooLarge(f"oracle: r={r} outside [0, {max(n - 1, 0)}] for n={n}")
    if r == 0:
        return MatchPlan(n=n, pairs=()), 0.0

    best_total = -np.inf
    best_pairs: tuple[tuple[int, int], ...] | None = None
    tokens = range(n)
    for source_set in itertools.combinations(tokens, r):
        others = np.array([j for j in tokens if j not in source_set], dtype=np.int64)
        total = 0.0
        pairs = []
        for s in source_set:
            row = sim.entries[s, others]
            k = int(np.argmax(row))
            total += float(row[k])
            pairs.append((s, int(others[k])))
        if total > best_total:
            best_total = total
            best_pairs = tuple(pairs)
    assert best_pairs is not None
    return MatchPlan(n=n, pairs=best_pairs), float(best_total)
