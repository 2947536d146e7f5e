"""Wall-time benchmark for complete-graph matching.

Times the full pipeline (cosine similarity, priority mask, source
selection, stack ensemble) on seeded gaussian tokens and fits a log-log
slope across sizes. The dominant kernels are dense n^2 passes, so the
slope should sit near 2.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .analysis import synthetic_tokens
from .errors import EmptyInput
from .matching import reduce_tokens


@dataclass(frozen=True)
class BenchEntry:
    n: int
    median_us: float
    min_us: float


@dataclass(frozen=True)
class BenchReport:
    dim: int
    repeats: int
    seed: int
    entries: tuple[BenchEntry, ...]
    log_log_slope: float


def time_complete_graph_match(
    n: int, dim: int = 64, repeats: int = 5, seed: int = 0
) -> BenchEntry:
    """Median/min wall time of one reduction at the given size."""
    if n < 4:
        raise EmptyInput("benchmark sizes below 4 tokens are not meaningful")
    tokens = synthetic_tokens(n, dim, seed=seed)
    r = n // 4
    reduce_tokens(tokens, tokens, r)  # warmup outside the timed region
    samples = []
    for _ in range(max(repeats, 1)):
        start = time.perf_counter_ns()
        reduce_tokens(tokens, tokens, r)
        samples.append((time.perf_counter_ns() - start) / 1000.0)
    return BenchEntry(
        n=n, median_us=float(np.median(samples)), min_us=float(min(samples))
    )


def run_matching_benchmark(
    sizes=(64, 128, 256, 512, 1024), dim: int = 64, repeats: int = 5, seed: int = 0
) -> BenchReport:
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 1:
        raise EmptyInput("need at least one size")
    entries = tuple(
        time_complete_graph_match(n, dim=dim, repeats=repeats, seed=seed)
        for n in sizes
    )
    if len(entries) >= 2:
        xs = np.log([e.n for e in entries])
        ys = np.log([max(e.median_us, 1e-9) for e in entries])
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = 0.0
    return BenchReport(
        dim=dim, repeats=repeats, seed=seed, entries=entries, log_log_slope=slope
    )
