"""Common result and statistics records shared by all planners."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .mdp import NodeId


@dataclass
class PlanStats:
    """Per-run accounting consumed by the bench harness."""

    planner: str
    engine: str
    iterations: int = 0          # expansions (AO*/anytime), rollouts (UCT), trials (LRTDP)
    nodes_created: int = 0
    delta_passes: int = 0
    wall_time_s: float = 0.0
    audit_violations: int = 0
    trace: list[NodeId] | None = None


@dataclass
class PlanResult:
    """Outcome of one planning call (cost convention throughout)."""

    action: Any                  # recommended root action
    value: float                 # root value estimate
    root_q: dict[Any, float] = field(default_factory=dict)
    stats: PlanStats | None = None
