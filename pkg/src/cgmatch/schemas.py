"""Pydantic request/response models for the service and CLI reports.

Every response is a single self-describing document with an embedded
schema version and tool version. RunReport is the canonical matching
report; its JSON form round-trips losslessly.
"""

from __future__ import annotations

from pydantic import BaseModel, Field

from . import __version__

SCHEMA_VERSION = 1

METHOD_CHOICES = ("cgsm", "cgsm-guided", "bipartite", "greedy", "kmeans", "random", "oracle")
SIMULATE_CHOICES = ("cgsm", "bipartite")


class MatchRequest(BaseModel):
    payload_b64: str = Field(description="base64 of a binary embedding file or CSV text")
    method: str = Field(pattern="^(" + "|".join(METHOD_CHOICES) + ")$")
    r: int = Field(ge=0)
    importance_b64: str | None = None
    protect: list[int] = Field(default_factory=list)
    seed: int = 0
    include_timing: bool = False
    kmeans_iterations: int = Field(default=10, ge=1)


class RunReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    method: str
    n: int
    r: int
    seed: int
    protected: list[int] = Field(default_factory=list)
    pairs: list[tuple[int, int]] = Field(default_factory=list)
    stacks: list[list[int]] = Field(default_factory=list)
    objective: float | None = None
    degenerate_fallbacks: int = 0
    timing_us: int | None = None


class ExpectRequest(BaseModel):
    n: int = Field(ge=2)
    layers: int = Field(ge=1)
    r: int = Field(ge=1)


class ExpectReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    n: int
    layers: int
    r: int
    expectation_complete: float
    expectation_bipartite: float
    gap: float


class SimulateRequest(BaseModel):
    n: int = Field(ge=2)
    layers: int = Field(ge=1)
    r: int = Field(ge=1)
    trials: int = Field(ge=1)
    seed: int = 0
    method: str = Field(pattern="^(" + "|".join(SIMULATE_CHOICES) + ")$")


class SimulateReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    n: int
    layers: int
    r: int
    trials: int
    seed: int
    method: str
    rate: float
    closed_form: float
    abs_error: float


class ScheduleRequest(BaseModel):
    n0: int = Field(ge=2)
    layers: int = Field(ge=1)


class ScheduleReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    n0: int
    layers: int
    r_per_layer: list[int]
    final_tokens: int


class FlopsBranchSpec(BaseModel):
    name: str
    layers: int = Field(ge=0)
    width: int = Field(ge=1)
    tokens: int = Field(ge=1)
    mlp_ratio: float = Field(default=4.0, gt=0)
    reduced: bool = False
    r_per_layer: list[int] | None = None


class FlopsRequest(BaseModel):
    branches: list[FlopsBranchSpec]
    flops_per_mac: int = Field(default=1, ge=1, le=2)


class LayerFlopsRow(BaseModel):
    branch: str
    layer: int
    attention_flops: float
    mlp_flops: float
    tokens_at_attention: int
    tokens_at_mlp: int


class FlopsReportDoc(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    total_flops: float
    total_gflops: float
    baseline_flops: float
    baseline_gflops: float
    reduction_fraction: float
    flops_per_mac: int
    per_layer: list[LayerFlopsRow]


class BenchRequest(BaseModel):
    sizes: list[int] = Field(default_factory=lambda: [64, 128, 256, 512, 1024])
    dim: int = Field(default=64, ge=2)
    repeats: int = Field(default=5, ge=1)
    seed: int = 0


class BenchEntryRow(BaseModel):
    n: int
    median_us: float
    min_us: float


class BenchReportDoc(BaseModel):
    schema_version: int = SCHEMA_VERSION
    tool_version: str = __version__
    dim: int
    repeats: int
    seed: int
    entries: list[BenchEntryRow]
    log_log_slope: float


class HealthReport(BaseModel):
    status: str = "ok"
    tool_version: str = __version__
