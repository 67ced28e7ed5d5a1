"""Anytime action selection for finite-horizon MDPs.

Planners: classic AO* and its anytime variant over a shared explicit AND/OR
graph, UCT, and labeled RTDP, all taking an :class:`~horizonplan.mdp.MdpModel`
plus a ``(state, horizon)`` pair and returning the recommended action with
root Q values. Hot search loops have compiled twins (``horizonplan._speedups``)
selected automatically at import when built; set ``HORIZONPLAN_PURE=1`` to
force the pure-Python engines.
"""

from ._engine import PlanContext, compiled_available
from .aot import AotConfig, ao_star, aot_plan
from .heuristics import (
    GreedyPolicy,
    Heuristic,
    MinMinHeuristic,
    RandomPolicy,
    ScaledHeuristic,
    ZeroHeuristic,
)
from .lrtdp import LrtdpConfig, lrtdp_plan
from .mdp import MdpModel, NodeId, RewardMdp, TabularMdp, as_cost_model, chain2_model
from .oracle import backward_induction
from .results import PlanResult, PlanStats
from .uct import UctConfig, uct_plan

__all__ = [
    "AotConfig",
    "GreedyPolicy",
    "Heuristic",
    "LrtdpConfig",
    "MdpModel",
    "MinMinHeuristic",
    "NodeId",
    "PlanContext",
    "PlanResult",
    "PlanStats",
    "RandomPolicy",
    "RewardMdp",
    "ScaledHeuristic",
    "TabularMdp",
    "UctConfig",
    "ZeroHeuristic",
    "ao_star",
    "aot_plan",
    "as_cost_model",
    "backward_induction",
    "chain2_model",
    "compiled_available",
    "lrtdp_plan",
    "uct_plan",
]

__version__ = "0.1.0"
