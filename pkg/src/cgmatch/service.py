"""FastAPI service exposing the matching engine.

Domain errors surface as HTTP 400 with a stable error code; request
shape problems are FastAPI's usual 422. Run it with
``uvicorn cgmatch.service:app`` or drive it in-process through the CLI.
"""

from __future__ import annotations

import base64
import binascii
import time

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import __version__, analysis, baselines, bench, flops
from .errors import (
    CgmatchError,
    FileFormatError,
    MissingImportance,
    UnsupportedOption,
)
from .fileio import parse_importance, sniff_payload
from .matching import (
    ReductionOptions,
    build_stacks,
    priority_mask,
    select_match_plan,
)
from .numerics import SimilarityMatrix, TokenMatrix, cosine_similarity_matrix
from .schemas import (
    BenchEntryRow,
    BenchReportDoc,
    BenchRequest,
    ExpectReport,
    ExpectRequest,
    FlopsReportDoc,
    FlopsRequest,
    HealthReport,
    LayerFlopsRow,
    MatchRequest,
    RunReport,
    ScheduleReport,
    ScheduleRequest,
    SimulateReport,
    SimulateRequest,
)

app = FastAPI(title="cgmatch", version=__version__)


@app.exception_handler(CgmatchError)
async def _domain_error(_: Request, exc: CgmatchError) -> JSONResponse:
    return JSONResponse(
        status_code=400, content={"error": {"code": exc.code, "message": str(exc)}}
    )


@app.get("/healthz")
def healthz() -> HealthReport:
    return HealthReport()


def _decode_b64(text: str, what: str) -> bytes:
    try:
        return base64.b64decode(text, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise FileFormatError(f"{what}: invalid base64 ({exc})") from None


def _similarity_of(payload: TokenMatrix | SimilarityMatrix) -> SimilarityMatrix:
    if isinstance(payload, SimilarityMatrix):
        return payload
    return cosine_similarity_matrix(payload)


def _compute_match(req: MatchRequest) -> RunReport:
    payload = sniff_payload(_decode_b64(req.payload_b64, "payload"))
    n = payload.n if isinstance(payload, SimilarityMatrix) else payload.n_tokens

    importance: np.ndarray | None = None
    if req.importance_b64 is not None:
        importance = parse_importance(_decode_b64(req.importance_b64, "importance"), n)

    if req.protect and req.method not in ("cgsm", "cgsm-guided"):
        raise UnsupportedOption(
            f"protect is only supported by cgsm methods, not {req.method}"
        )

    started = time.perf_counter_ns()
    pairs: list[tuple[int, int]] = []
    objective_value: float | None = None
    fallbacks = 0

    if req.method in ("cgsm", "cgsm-guided"):
        if req.method == "cgsm-guided" and importance is None:
            raise MissingImportance("cgsm-guided requires an importance file")
        opts = ReductionOptions(
            importance=importance if req.method == "cgsm-guided" else None,
            protected_indices=frozenset(req.protect),
        )
        sim = _similarity_of(payload)
        plan = select_match_plan(priority_mask(sim), req.r, opts)
        pairs = list(plan.pairs)
        objective_value = analysis.objective(sim, plan)
        fallbacks = plan.degenerate_fallbacks
        stacks = build_stacks(plan)
    elif req.method == "bipartite":
        sim = _similarity_of(payload)
        plan = baselines.bipartite_soft_match(sim, req.r)
        pairs, objective_value = list(plan.pairs), analysis.objective(sim, plan)
        stacks = build_stacks(plan)
    elif req.method == "greedy":
        sim = _similarity_of(payload)
        plan = baselines.greedy_match(sim, req.r)
        pairs, objective_value = list(plan.pairs), analysis.objective(sim, plan)
        stacks = build_stacks(plan)
    elif req.method == "random":
        sim = _similarity_of(payload)
        plan = baselines.random_match(n, req.r, seed=req.seed)
        pairs, objective_value = list(plan.pairs), analysis.objective(sim, plan)
        stacks = build_stacks(plan)
    elif req.method == "oracle":
        sim = _similarity_of(payload)
        plan, best = baselines.exhaustive_optimal(sim, req.r)
        pairs, objective_value = list(plan.pairs), best
        stacks = build_stacks(plan)
    else:  # kmeans
        if not isinstance(payload, TokenMatrix):
            raise FileFormatError("kmeans needs token embeddings, not a similarity matrix")
        stacks = baselines.kmeans_match(
            payload, req.r, iterations=req.kmeans_iterations, seed=req.seed
        )
    elapsed_us = (time.perf_counter_ns() - started) // 1000

    return RunReport(
        method=req.method,
        n=n,
        r=req.r,
        seed=req.seed,
        protected=sorted(req.protect),
        pairs=pairs,
        stacks=[list(g) for g in stacks.stacks],
        objective=objective_value,
        degenerate_fallbacks=fallbacks,
        timing_us=elapsed_us if req.include_timing else None,
    )


@app.post("/match")
def match(req: MatchRequest) -> RunReport:
    return _compute_match(req)


@app.post("/expect")
def expect(req: ExpectRequest) -> ExpectReport:
    e_complete = analysis.expectation_cgsm(req.n, req.layers, req.r)
    e_bipartite = analysis.expectation_bipartite(req.n, req.layers, req.r)
    return ExpectReport(
        n=req.n,
        layers=req.layers,
        r=req.r,
        expectation_complete=e_complete,
        expectation_bipartite=e_bipartite,
        gap=e_complete - e_bipartite,
    )


@app.post("/simulate")
def simulate(req: SimulateRequest) -> SimulateReport:
    matcher = analysis.SimulatedMatcher(req.method)
    rate = analysis.simulate_optimal_match_rate(
        req.n, req.layers, req.r, req.trials, seed=req.seed, method=matcher
    )
    if matcher is analysis.SimulatedMatcher.COMPLETE_GRAPH:
        closed = analysis.expectation_cgsm(req.n, req.layers, req.r)
    else:
        closed = analysis.expectation_bipartite(req.n, req.layers, req.r)
    return SimulateReport(
        n=req.n,
        layers=req.layers,
        r=req.r,
        trials=req.trials,
        seed=req.seed,
        method=req.method,
        rate=rate,
        closed_form=closed,
        abs_error=abs(rate - closed),
    )


@app.post("/schedule")
def schedule(req: ScheduleRequest) -> ScheduleReport:
    cfg = analysis.halving_schedule(req.n0, req.layers)
    return ScheduleReport(
        n0=cfg.n0,
        layers=cfg.layers,
        r_per_layer=list(cfg.r_per_layer),
        final_tokens=cfg.final_tokens,
    )


@app.post("/flops")
def flops_endpoint(req: FlopsRequest) -> FlopsReportDoc:
    branches = tuple(
        flops.BranchConfig(
            name=b.name,
            layers=b.layers,
            width=b.width,
            tokens=b.tokens,
            mlp_ratio=b.mlp_ratio,
            reduced=b.reduced,
        )
        for b in req.branches
    )
    schedules = {
        b.name: analysis.ScheduleConfig(
            n0=b.tokens, layers=b.layers, r_per_layer=tuple(b.r_per_layer)
        )
        for b in req.branches
        if b.r_per_layer is not None
    }
    report = flops.flops_estimate(
        flops.ModelConfig(branches=branches),
        schedules=schedules,
        flops_per_mac=req.flops_per_mac,
    )
    return FlopsReportDoc(
        total_flops=report.total,
        total_gflops=report.total / 1e9,
        baseline_flops=report.baseline_total,
        baseline_gflops=report.baseline_total / 1e9,
        reduction_fraction=report.reduction_fraction,
        flops_per_mac=report.flops_per_mac,
        per_layer=[
            LayerFlopsRow(
                branch=row.branch,
                layer=row.layer,
                attention_flops=row.attention_flops,
                mlp_flops=row.mlp_flops,
                tokens_at_attention=row.tokens_at_attention,
                tokens_at_mlp=row.tokens_at_mlp,
            )
            for row in report.per_layer
        ],
    )


@app.post("/bench")
def bench_endpoint(req: BenchRequest) -> BenchReportDoc:
    report = bench.run_matching_benchmark(
        sizes=req.sizes, dim=req.dim, repeats=req.repeats, seed=req.seed
    )
    return BenchReportDoc(
        dim=report.dim,
        repeats=report.repeats,
        seed=report.seed,
        entries=[
            BenchEntryRow(n=e.n, median_us=e.median_us, min_us=e.min_us)
            for e in report.entries
        ],
        log_log_slope=report.log_log_slope,
    )
