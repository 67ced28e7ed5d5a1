"""UCT over the duplicate-merged finite-horizon node store.

Each rollout descends from the root picking actions greedily on the stored
mean cost minus an exploration bonus, samples one stochastic outcome per
step, and stops at terminals, at depth zero, or at the first node not yet in
the store, which is then added and evaluated by simulating the base policy
for the remaining depth. Values propagate back along the simulated path with
incremental-mean backups.

Internally everything is cost minimization: the classic reward-form bonus is
subtracted rather than added, untried actions score ``-inf`` and therefore
always win, and every action at a node is tried once before any is retried.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from ._engine import PlanContext, compiled_module, resolve_engine
from .heuristics import BasePolicy, RandomPolicy, simulate_policy
from .mdp import DEAD_END, GOAL, NodeId, State, pick_outcome
from .results import PlanResult, PlanStats
from .rng import SplitMix64

__all__ = ["UctConfig", "UctNode", "uct_plan", "bonus", "mc_backup"]


@dataclass
class UctConfig:
    """Tunables for UCT action selection.

    ``exploration`` is either a fixed nonnegative constant or ``"adaptive"``,
    which plugs the magnitude of the current mean cost of the action into the
    bonus at every evaluation (zero bonus for actions whose mean is still
    exactly zero; a known degeneracy of the adaptive rule, which is why the
    fixed mode stays available).
    """

    budget: int = 1000
    time_ms: float | None = None
    exploration: float | str = "adaptive"
    base_policy: BasePolicy = field(default_factory=RandomPolicy)
    seed: int = 0
    engine: str = "auto"
    audit: bool = False

    def validate(self) -> None:
        if self.budget < 1:
            raise ValueError("rollout budget must be at least 1")
        if isinstance(self.exploration, str):
            if self.exploration != "adaptive":
                raise ValueError(f"unknown exploration mode {self.exploration!r}")
        elif self.exploration < 0:
            raise ValueError("exploration constant must be nonnegative")
        if self.time_ms is not None and self.time_ms < 0:
            raise ValueError("time budget must be nonnegative")


class UctNode:
    """Visit counters and per-action mean costs of one ``(state, d)`` node."""

    __slots__ = ("visits", "counts", "values")

    def __init__(self, n_actions: int):
        self.visits = 0
        self.counts = [0] * n_actions
        self.values = [0.0] * n_actions


def bonus(node: UctNode, action_index: int, exploration: float | str) -> float:
    """Exploration bonus for one action; infinite while the action is untried."""
    n_a = node.counts[action_index]
    if n_a == 0:
        return math.inf
    if exploration == "adaptive":
        c = abs(node.values[action_index])
    else:
        c = exploration
    return c * math.sqrt(2.0 * math.log(node.visits) / n_a)


def mc_backup(q: float, n_after_increment: int, sampled_value: float) -> float:
    """Incremental mean update after the count has been incremented."""
    return q + (sampled_value - q) / n_after_increment


class _Search:
    def __init__(self, model, cfg: UctConfig, rng: SplitMix64):
        self.model = model
        self.cfg = cfg
        self.rng = rng
        self.store: dict[NodeId, UctNode] = {}
        self.audit_violations = 0
        self.samples: dict[tuple[NodeId, int], list[float]] | None = {} if cfg.audit else None

    def rollout(self, state: State, d: int) -> float:
        model = self.model
        kind = model.terminal_kind(state)
        if kind == GOAL:
            return 0.0
        if kind == DEAD_END:
            return model.dead_end_value
        if d == 0:
            return 0.0
        node_id = NodeId(state, d)
        node = self.store.get(node_id)
        actions, costs, transitions = model.entry(state)
        if node is None:
            self.store[node_id] = UctNode(len(actions))
            return simulate_policy(model, self.cfg.base_policy, state, d, self.rng)
        exploration = self.cfg.exploration
        best = math.inf
        scores = []
        for j in range(len(actions)):
            score = node.values[j] - bonus(node, j, exploration)
            scores.append(score)
            if score < best:
                best = score
        ties = [j for j, s in enumerate(scores) if s == best]
        j = ties[self.rng.next_below(len(ties))]
        if self.samples is not None and 0 in node.counts and node.counts[j] != 0:
            self.audit_violations += 1
        successor = pick_outcome(transitions[j], self.rng)
        sampled = costs[j] + model.gamma * self.rollout(successor, d - 1)
        node.visits += 1
        node.counts[j] += 1
        node.values[j] = mc_backup(node.values[j], node.counts[j], sampled)
        if self.samples is not None:
            self.samples.setdefault((node_id, j), []).append(sampled)
        return sampled


def _plan_pure(context: PlanContext, state: State, horizon: int, cfg: UctConfig) -> PlanResult:
    model = context.cached
    rng = SplitMix64(cfg.seed)
    search = _Search(model, cfg, rng)
    deadline = None if cfg.time_ms is None else time.perf_counter() + cfg.time_ms / 1000.0
    start_time = time.perf_counter()
    rollouts = 0
    for _ in range(cfg.budget):
        if deadline is not None and rollouts > 0 and time.perf_counter() >= deadline:
            break
        search.rollout(state, horizon)
        rollouts += 1

    actions = model.entry(state)[0]
    root = search.store[NodeId(state, horizon)]
    action_index = _recommend(root)
    stats = PlanStats(
        planner="uct",
        engine="pure",
        iterations=rollouts,
        nodes_created=len(search.store),
        wall_time_s=time.perf_counter() - start_time,
        audit_violations=search.audit_violations,
    )
    return PlanResult(
        action=actions[action_index],
        value=root.values[action_index],
        root_q={a: root.values[j] for j, a in enumerate(actions)},
        stats=stats,
    )


def _recommend(root: UctNode) -> int:
    """Root recommendation: best mean among tried actions, stable on ties."""
    best = None
    best_j = 0
    for j, count in enumerate(root.counts):
        if count > 0 and (best is None or root.values[j] < best):
            best = root.values[j]
            best_j = j
    return best_j


def _policy_spec(policy: BasePolicy):
    if policy.kind == "random":
        return ("random", None)
    if policy.kind == "greedy":
        return ("greedy", policy.heuristic)
    return ("lookup", policy)


def _plan_compiled(context: PlanContext, state: State, horizon: int, cfg: UctConfig) -> PlanResult:
    mod = compiled_module()
    start_time = time.perf_counter()
    space = context.space()
    exploration = -1.0 if cfg.exploration == "adaptive" else float(cfg.exploration)
    out = mod.uct_plan(
        space,
        state,
        horizon,
        cfg.budget,
        -1.0 if cfg.time_ms is None else cfg.time_ms,
        exploration,
        cfg.seed & ((1 << 64) - 1),
        _policy_spec(cfg.base_policy),
        1 if cfg.audit else 0,
    )
    action_index, value, q_list, rollouts, nodes, violations = out
    actions = context.cached.entry(state)[0]
    stats = PlanStats(
        planner="uct",
        engine="compiled",
        iterations=rollouts,
        nodes_created=nodes,
        wall_time_s=time.perf_counter() - start_time,
        audit_violations=violations,
    )
    return PlanResult(
        action=actions[action_index],
        value=value,
        root_q={a: q for a, q in zip(actions, q_list)},
        stats=stats,
    )


def uct_plan(model, state: State, horizon: int, config: UctConfig | None = None) -> PlanResult:
    """Run ``budget`` rollouts from ``(state, horizon)`` and recommend the
    root action with the lowest mean cost among those actually tried."""
    cfg = config or UctConfig()
    cfg.validate()
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    context = PlanContext.of(model)
    if context.cached.terminal_kind(state) != 0:
        raise ValueError(f"initial state {state!r} is terminal")
    supported = cfg.base_policy.kind in ("random", "greedy", "lookup")
    engine = resolve_engine(cfg.engine, supported, f"base policy kind {cfg.base_policy.kind!r}")
    if engine == "compiled":
        return _plan_compiled(context, state, horizon, cfg)
    return _plan_pure(context, state, horizon, cfg)
