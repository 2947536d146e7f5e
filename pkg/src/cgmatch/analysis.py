"""Objective evaluation, match-rate expectations, schedules, and the
multi-layer reduction harness.

The closed-form expectations model the chance that a source token's
optimal destination survives as an actual destination; the Monte Carlo
simulator replays the same abstract model with counter-derived
substreams so estimates are reproducible for a fixed seed and trial
count regardless of evaluation order.
"""

from __future__ import annotations

import enum
import hashlib
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .errors import IndexOutOfRange, InvalidSchedule
from .matching import (
    EnsembleMode,
    MatchPlan,
    ReductionOptions,
    build_stacks,
    ensemble_stacks,
    priority_mask,
    select_match_plan,
)
from .numerics import NORM_EPS, SimilarityMatrix, TokenMatrix, cosine_similarity_matrix


class MatchMethod(enum.Enum):
    """Every matcher the CLI and the layered harness can drive."""

    COMPLETE_GRAPH = "cgsm"
    COMPLETE_GRAPH_GUIDED = "cgsm-guided"
    BIPARTITE = "bipartite"
    GREEDY = "greedy"
    KMEANS = "kmeans"
    RANDOM = "random"
    ORACLE = "oracle"


class SimulatedMatcher(enum.Enum):
    COMPLETE_GRAPH = "cgsm"
    BIPARTITE = "bipartite"


def objective(sim: SimilarityMatrix, plan: MatchPlan) -> float:
    """Sum of unmasked similarity over the plan's pairs."""
    if plan.n != sim.n:
        raise IndexOutOfRange(f"plan is over n={plan.n}, matrix has n={sim.n}")
    return float(sum(sim.entries[s, d] for s, d in plan.pairs))


def _check_schedule_params(N: int, L: int, r: int) -> None:
    if N < 2 or L < 1 or r < 1 or N - L * r < 1:
        raise InvalidSchedule(
            f"need N >= 2, L >= 1, r >= 1 and N - L*r >= 1; got N={N}, L={L}, r={r}"
        )


def expectation_cgsm(N: int, L: int, r: int) -> float:
    """Closed-form optimal-destination survival rate, complete graph.

    Mean over layers of (N - l*r) / (N + (1 - l)*r - 1): at layer l the
    N + (1-l)r current tokens keep N - lr of themselves as destinations,
    and a source's optimal partner is uniform over the other tokens.
    """
    _check_schedule_params(N, L, r)
    total = 0.0
    for layer in range(1, L + 1):
        total += (N - layer * r) / (N + (1 - layer) * r - 1)
    return total / L


def expectation_bipartite(N: int, L: int, r: int) -> float:
    """Closed-form survival rate for the alternating bipartite split.

    Only the floor(half) tokens on the destination side can receive, so
    each layer contributes floor(n_l / 2) / (n_l - 1).
    """
    _check_schedule_params(N, L, r)
    total = 0.0
    for layer in range(1, L + 1):
        n_l = N + (1 - layer) * r
        total += (n_l // 2) / (n_l - 1)
    return total / L


# fixed trial-block size: substreams are keyed by (seed, layer, block), so
# the estimate depends only on (seed, trials), never on evaluation order
_MC_BLOCK = 4096


def simulate_optimal_match_rate(
    N: int,
    L: int,
    r: int,
    trials: int,
    seed: int = 0,
    method: SimulatedMatcher = SimulatedMatcher.COMPLETE_GRAPH,
) -> float:
    """Monte Carlo replay of the abstract matching model.

    Per layer, every source draws its optimal destination uniformly among
    the other tokens; a draw succeeds when it lands in the destination
    set. Layers contribute equally (matching the closed forms), so the
    returned rate is the mean over layers of each layer's success
    fraction. Blocks of trials use independent Philox substreams and
    integer-count aggregation.
    """
    _check_schedule_params(N, L, r)
    if trials < 1:
        raise InvalidSchedule("trials must be >= 1")
    layer_rates = []
    for layer in range(1, L + 1):
        n_l = N + (1 - layer) * r
        if method is SimulatedMatcher.COMPLETE_GRAPH:
            n_sources = r
        else:
            n_sources = (n_l + 1) // 2
        n_dest = n_l - n_sources if method is not SimulatedMatcher.COMPLETE_GRAPH else n_l - r
        # enumerate a source's n_l - 1 candidate tokens with the other
        # sources first: a draw >= n_sources - 1 hits the destination set
        threshold = n_sources - 1
        successes = 0
        done = 0
        block = 0
        while done < trials:
            take = min(_MC_BLOCK, trials - done)
            rng = np.random.Generator(
                np.random.Philox(np.random.SeedSequence((seed, layer, block)))
            )
            draws = rng.integers(0, n_l - 1, size=take * n_sources, dtype=np.int64)
            successes += int(np.count_nonzero(draws >= threshold))
            done += take
            block += 1
        assert n_dest == n_l - 1 - threshold
        layer_rates.append(successes / (trials * n_sources))
    return float(np.mean(layer_rates))


def effective_r(n_remaining: int, r: int) -> int:
    """Clamp r so a split-based matcher still has destinations: min(r, n//2)."""
    return min(r, n_remaining // 2)


@dataclass(frozen=True)
class ScheduleConfig:
    """Per-layer reduction counts starting from n0 tokens."""

    n0: int
    layers: int
    r_per_layer: tuple[int, ...]
    final_tokens: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self) -> None:
        rs = tuple(int(x) for x in self.r_per_layer)
        object.__setattr__(self, "r_per_layer", rs)
        if self.layers < 1 or len(rs) != self.layers:
            raise InvalidSchedule(
                f"need exactly layers={self.layers} entries, got {len(rs)}"
            )
        remaining = self.n0
        for layer, r in enumerate(rs):
            if r < 0:
                raise InvalidSchedule(f"layer {layer}: negative r")
            if r > remaining - 1:
                raise InvalidSchedule(
                    f"layer {layer}: r={r} would drop below 1 token "
                    f"(remaining {remaining})"
                )
            remaining -= r
        object.__setattr__(self, "final_tokens", remaining)


def halving_schedule(n0: int, L: int) -> ScheduleConfig:
    """Spread an overall halving over L layers: r = floor(n0 / L) each.

    The last layers may hold fewer than 2r tokens; the complete-graph
    matcher still removes the full r there by sharing destinations, so r
    is only clamped to keep at least one token alive.
    """
    if n0 <= L:
        raise InvalidSchedule(f"need n0 > L, got n0={n0}, L={L}")
    r = n0 // L
    rs = []
    remaining = n0
    for _ in range(L):
        r_l = min(r, remaining - 1)
        rs.append(r_l)
        remaining -= r_l
    return ScheduleConfig(n0=n0, layers=L, r_per_layer=tuple(rs))


@dataclass(frozen=True)
class LayerOutcome:
    layer: int
    n_before: int
    r_scheduled: int
    r_applied: int
    objective: float | None
    degenerate_fallbacks: int
    wall_time_us: int


@dataclass(frozen=True, eq=False)
class ReductionReport:
    """Everything a layered run produced.

    ``canonical_dict`` excludes wall times: those are telemetry, while
    the rest of the report is bit-reproducible for a fixed seed.
    """

    method: MatchMethod
    schedule: ScheduleConfig
    outcomes: tuple[LayerOutcome, ...]
    final_tokens: TokenMatrix
    mixing_seed: int
    method_seed: int

    def __post_init__(self) -> None:
        n = self.schedule.n0
        for out in self.outcomes:
            if out.n_before != n:
                raise InvalidSchedule(
                    f"layer {out.layer}: expected {n} tokens, recorded {out.n_before}"
                )
            n -= out.r_applied
        if self.final_tokens.n_tokens != n:
            raise InvalidSchedule(
                f"final count {self.final_tokens.n_tokens} does not match arithmetic {n}"
            )

    @property
    def final_count(self) -> int:
        return self.final_tokens.n_tokens

    @property
    def total_objective(self) -> float:
        return float(sum(o.objective for o in self.outcomes if o.objective is not None))

    @property
    def total_fallbacks(self) -> int:
        return sum(o.degenerate_fallbacks for o in self.outcomes)

    def canonical_dict(self) -> dict:
        return {
            "method": self.method.value,
            "n0": self.schedule.n0,
            "layers": self.schedule.layers,
            "r_per_layer": list(self.schedule.r_per_layer),
            "mixing_seed": self.mixing_seed,
            "method_seed": self.method_seed,
            "per_layer": [
                {
                    "layer": o.layer,
                    "n_before": o.n_before,
                    "r_scheduled": o.r_scheduled,
                    "r_applied": o.r_applied,
                    "objective": o.objective,
                    "degenerate_fallbacks": o.degenerate_fallbacks,
                }
                for o in self.outcomes
            ],
            "final_count": self.final_count,
            "total_objective": self.total_objective,
            "final_tokens_sha256": hashlib.sha256(
                self.final_tokens.array.tobytes()
            ).hexdigest(),
        }


def synthetic_tokens(n: int, dim: int, seed: int = 0) -> TokenMatrix:
    """Seeded gaussian token source for harness runs."""
    rng = np.random.default_rng(seed)
    return TokenMatrix(rng.standard_normal((n, dim)))


def _orthogonal_mixer(dim: int, seed_key: tuple) -> np.ndarray:
    """Deterministic random orthogonal map (QR with sign fixing)."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed_key)))
    q, upper = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(upper))


def _runner_cap(method: MatchMethod, n: int) -> int:
    # split-based matchers cannot source more than half the tokens; the
    # complete-graph family shares destinations and only needs one left
    if method in (MatchMethod.BIPARTITE, MatchMethod.GREEDY):
        return n // 2
    return max(n - 1, 0)


def layered_reduction_run(
    tokens: TokenMatrix,
    method: MatchMethod,
    schedule: ScheduleConfig,
    opts: ReductionOptions | None = None,
    mixing_seed: int = 0,
    method_seed: int = 0,
    kmeans_iterations: int = 10,
) -> ReductionReport:
    """Drive a matcher through a whole reduction schedule.

    Each layer re-keys the current tokens through a fixed seeded
    orthogonal map (norm-preserving, so cosine statistics stay sane),
    matches on those keys, and ensembles the untouched token rows.
    Guided matching derives per-layer importance from a seeded query
    vector against the same keys. Protected indices are remapped to
    their new positions after every layer.
    """
    if tokens.n_tokens != schedule.n0:
        raise InvalidSchedule(
            f"schedule starts at n0={schedule.n0}, tokens have n={tokens.n_tokens}"
        )
    opts = opts or ReductionOptions()
    protected = set(opts.protected_indices)
    outcomes: list[LayerOutcome] = []
    current = tokens

    for layer, r_sched in enumerate(schedule.r_per_layer):
        n = current.n_tokens
        r_applied = min(r_sched, _runner_cap(method, n))
        if protected and method in (
            MatchMethod.COMPLETE_GRAPH,
            MatchMethod.COMPLETE_GRAPH_GUIDED,
        ):
            # protected tokens are off limits, shrink r to what is left
            r_applied = min(r_applied, max(n - len(protected) - 1, 0))
        started = time.perf_counter_ns()

        mixer = _orthogonal_mixer(current.dim, (mixing_seed, 1, layer))
        keys = TokenMatrix(current.array @ mixer)

        layer_objective: float | None = None
        fallbacks = 0
        if r_applied == 0:
            stacks = None
            plan = MatchPlan(n=n, pairs=())
        elif method is MatchMethod.KMEANS:
            stacks = baselines.kmeans_match(
                keys, r_applied, iterations=kmeans_iterations, seed=method_seed
            )
            plan = None
        else:
            sim = cosine_similarity_matrix(keys)
            if method in (MatchMethod.COMPLETE_GRAPH, MatchMethod.COMPLETE_GRAPH_GUIDED):
                layer_opts = _layer_options(
                    method, keys, opts, protected, mixing_seed, layer
                )
                plan = select_match_plan(priority_mask(sim), r_applied, layer_opts)
                fallbacks = plan.degenerate_fallbacks
            elif method is MatchMethod.BIPARTITE:
                plan = baselines.bipartite_soft_match(sim, r_applied)
            elif method is MatchMethod.GREEDY:
                plan = baselines.greedy_match(sim, r_applied)
            elif method is MatchMethod.RANDOM:
                plan = baselines.random_match(n, r_applied, seed=method_seed + layer)
            elif method is MatchMethod.ORACLE:
                plan, _ = baselines.exhaustive_optimal(sim, r_applied)
            else:  # pragma: no cover - enum is closed
                raise ValueError(f"unknown method {method}")
            layer_objective = objective(sim, plan)
            stacks = None

        if plan is not None:
            stacks = build_stacks(plan)
        ensemble_opts = ReductionOptions()  # plain averaging between layers
        current = ensemble_stacks(current, stacks, ensemble_opts)
        protected = {stacks.slot_of(p) for p in protected}

        outcomes.append(
            LayerOutcome(
                layer=layer,
                n_before=n,
                r_scheduled=r_sched,
                r_applied=r_applied,
                objective=layer_objective,
                degenerate_fallbacks=fallbacks,
                wall_time_us=(time.perf_counter_ns() - started) // 1000,
            )
        )

    return ReductionReport(
        method=method,
        schedule=schedule,
        outcomes=tuple(outcomes),
        final_tokens=current,
        mixing_seed=mixing_seed,
        method_seed=method_seed,
    )


def _layer_options(
    method: MatchMethod,
    keys: TokenMatrix,
    opts: ReductionOptions,
    protected: set[int],
    mixing_seed: int,
    layer: int,
) -> ReductionOptions:
    if method is MatchMethod.COMPLETE_GRAPH:
        return ReductionOptions(protected_indices=frozenset(protected))
    # guided: importance from a seeded probe query against this layer's keys
    rng = np.random.Generator(
        np.random.Philox(np.random.SeedSequence((mixing_seed, 2, layer)))
    )
    probe = rng.standard_normal(keys.dim)
    norms = np.maximum(np.linalg.norm(keys.array, axis=1), NORM_EPS)
    probe_norm = max(float(np.linalg.norm(probe)), NORM_EPS)
    importance = np.clip((keys.array @ probe) / (norms * probe_norm), -1.0, 1.0)
    return ReductionOptions(
        importance=importance,
        ensemble_mode=EnsembleMode.AVERAGE,
        protected_indices=frozenset(protected),
    )
