"""Analytic FLOPs accounting for transformer branches under reduction.

Only the dominant matrix multiplies are counted: QKV and output
projections, attention scores and value aggregation, and the two MLP
matmuls. Layernorm, softmax, and biases are omitted. Reduction lands
between attention and the MLP, so a layer attends over n tokens and runs
its MLP over n - r_l; the next layer starts from n - r_l.

``flops_per_mac`` selects the counting convention. Profiler-style
counting (one FLOP per multiply-accumulate, the default) reproduces the
usual reported GFLOPs for CLIP-scale models; passing 2 counts the
multiply and the add separately, exactly doubling every figure.
"""

from __future__ import annotations

from dataclasses import dataclass

from .analysis import ScheduleConfig, halving_schedule
from .errors import InvalidSchedule


@dataclass(frozen=True)
class BranchConfig:
    """One transformer stack (e.g. a vision or text tower)."""

    name: str
    layers: int
    width: int
    tokens: int
    mlp_ratio: float = 4.0
    reduced: bool = False

    def __post_init__(self) -> None:
        if self.layers < 0 or self.width < 1 or self.tokens < 1 or self.mlp_ratio <= 0:
            raise InvalidSchedule(f"branch {self.name!r}: dimensions must be positive")


@dataclass(frozen=True)
class ModelConfig:
    branches: tuple[BranchConfig, ...]

    def __post_init__(self) -> None:
        names = [b.name for b in self.branches]
        if len(set(names)) != len(names):
            raise InvalidSchedule("branch names must be unique")
        object.__setattr__(self, "branches", tuple(self.branches))


@dataclass(frozen=True)
class LayerFlops:
    branch: str
    layer: int
    attention_flops: float
    mlp_flops: float
    tokens_at_attention: int
    tokens_at_mlp: int


@dataclass(frozen=True)
class FlopsReport:
    per_layer: tuple[LayerFlops, ...]
    total: float
    baseline_total: float
    reduction_fraction: float
    flops_per_mac: int


def _layer_macs(n_attn: int, n_mlp: int, d: int, mlp_ratio: float) -> tuple[float, float]:
    attention = 4.0 * n_attn * d * d + 2.0 * n_attn * n_attn * d
    mlp = 2.0 * mlp_ratio * n_mlp * d * d
    return attention, mlp


def _branch_layers(
    branch: BranchConfig, schedule: ScheduleConfig | None, flops_per_mac: int
) -> tuple[list[LayerFlops], float]:
    rs = schedule.r_per_layer if schedule is not None else (0,) * branch.layers
    n = branch.tokens
    rows: list[LayerFlops] = []
    total = 0.0
    for layer, r_l in enumerate(rs):
        n_mlp = n - r_l
        attn_macs, mlp_macs = _layer_macs(n, n_mlp, branch.width, branch.mlp_ratio)
        attn = attn_macs * flops_per_mac
        mlp = mlp_macs * flops_per_mac
        rows.append(
            LayerFlops(
                branch=branch.name,
                layer=layer,
                attention_flops=attn,
                mlp_flops=mlp,
                tokens_at_attention=n,
                tokens_at_mlp=n_mlp,
            )
        )
        total += attn + mlp
        n = n_mlp
    return rows, total


def flops_estimate(
    model: ModelConfig,
    schedules: dict[str, ScheduleConfig] | None = None,
    flops_per_mac: int = 1,
) -> FlopsReport:
    """Total FLOPs for the model, plus the unreduced baseline.

    Reduced branches follow their schedule from ``schedules`` or default
    to ``halving_schedule``; unreduced branches run at constant token
    count. The baseline reruns everything with r = 0.
    """
    if flops_per_mac not in (1, 2):
        raise InvalidSchedule("flops_per_mac must be 1 or 2")
    schedules = dict(schedules or {})
    for name in schedules:
        if name not in {b.name for b in model.branches}:
            raise InvalidSchedule(f"schedule given for unknown branch {name!r}")

    per_layer: list[LayerFlops] = []
    total = 0.0
    baseline_total = 0.0
    for branch in model.branches:
        schedule = None
        if branch.reduced:
            schedule = schedules.get(branch.name)
            if schedule is None and branch.layers > 0:
                schedule = halving_schedule(branch.tokens, branch.layers)
            if schedule is not None and (
                schedule.n0 != branch.tokens or schedule.layers != branch.layers
            ):
                raise InvalidSchedule(
                    f"schedule ({schedule.n0}, {schedule.layers}) does not fit "
                    f"branch {branch.name!r} ({branch.tokens}, {branch.layers})"
                )
        elif branch.name in schedules:
            raise InvalidSchedule(
                f"branch {branch.name!r} is not marked reduced but has a schedule"
            )
        rows, branch_total = _branch_layers(branch, schedule, flops_per_mac)
        _, branch_baseline = _branch_layers(branch, None, flops_per_mac)
        per_layer.extend(rows)
        total += branch_total
        baseline_total += branch_baseline

    fraction = 0.0 if baseline_total == 0 else 1.0 - total / baseline_total
    return FlopsReport(
        per_layer=tuple(per_layer),
        total=total,
        baseline_total=baseline_total,
        reduction_fraction=fraction,
        flops_per_mac=flops_per_mac,
    )


def clip_like_model() -> ModelConfig:
    """Dual-tower reference config: 12x768 vision over 197 tokens plus
    12x512 text over 77, both with 4x MLPs. Vision is the reduced branch."""
    return ModelConfig(
        branches=(
            BranchConfig(name="vision", layers=12, width=768, tokens=197, reduced=True),
            BranchConfig(name="text", layers=12, width=512, tokens=77),
        )
    )
