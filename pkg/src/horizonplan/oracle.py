"""Exhaustive backward induction over the finite-horizon node space.

This is the reference solver the planners are tested against. It is kept
deliberately simple and independent of the incremental search machinery:
plain memoized recursion over ``(state, depth_to_go)`` pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .mdp import DEAD_END, GOAL, MdpModel, NodeId, State


class OracleLimitError(RuntimeError):
    """Raised when the reachable node count exceeds the configured cap."""


@dataclass
class ValueTable:
    """Values and Q-values of every reachable ``(state, d)`` node."""

    values: dict[NodeId, float] = field(default_factory=dict)
    q_values: dict[tuple[NodeId, Any], float] = field(default_factory=dict)
    policy: dict[NodeId, Any] = field(default_factory=dict)

    def value(self, state: State, d: int) -> float:
        return self.values[NodeId(state, d)]


def backward_induction(
    model: MdpModel,
    initial: State,
    horizon: int,
    node_cap: int = 2_000_000,
) -> ValueTable:
    """Solve the horizon-unrolled MDP exactly from ``initial``.

    ``V(s, 0) = 0`` for non-dead-end states; goals are worth 0 and dead ends
    the model's penalty at every depth. Ties between minimizing actions are
    broken by the model's stable action order.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    table = ValueTable()
    values = table.values
    gamma = model.gamma
    dead_end_value = model.dead_end_value

    def solve(state: State, d: int) -> float:
        node = NodeId(state, d)
        v = values.get(node)
        if v is not None:
            return v
        if len(values) >= node_cap:
            raise OracleLimitError(f"more than {node_cap} reachable nodes")
        kind = model.terminal_kind(state)
        if kind == DEAD_END:
            v = dead_end_value
        elif kind == GOAL or d == 0:
            v = 0.0
        else:
            best = None
            best_action = None
            for a in model.actions(state):
                acc = 0.0
                for s2, p in model.transitions(state, a):
                    acc += p * solve(s2, d - 1)
                q = model.cost(state, a) + gamma * acc
                table.q_values[(node, a)] = q
                if best is None or q < best:
                    best = q
                    best_action = a
            v = best
            table.policy[node] = best_action
        values[node] = v
        return v

    solve(initial, horizon)
    return table


def expected_initial_value(model: MdpModel, horizon: int, node_cap: int = 2_000_000) -> float:
    """Optimal expected cost over the model's initial-state distribution."""
    total = 0.0
    for p, s in model.initial_outcomes():
        total += p * backward_induction(model, s, horizon, node_cap).value(s, horizon)
    return total
