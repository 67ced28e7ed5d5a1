"""Labeled real-time dynamic programming over finite-horizon nodes.

Trials walk greedily from the root, Bellman-updating each visited node and
sampling one successor per step, until a solved or terminal node is reached;
the visited path is then checked bottom-up and nodes whose greedy closure is
within the residual tolerance are labeled solved. Used here as an anytime
action selector: each call starts from a fresh value table unless the caller
threads one through (values keyed by ``(state, depth_to_go)`` stay valid
across calls with the same horizon convention).

With an admissible heuristic labeled values are sound; with inadmissible
ones (e.g. scaled-up relaxations) labeling can freeze suboptimal values, a
documented property of running the standard algorithm this way.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ._engine import PlanContext, compiled_module, resolve_engine
from .heuristics import Heuristic, ZeroHeuristic
from .mdp import DEAD_END, GOAL, NodeId, State, pick_outcome
from .results import PlanResult, PlanStats
from .rng import SplitMix64

__all__ = ["LrtdpConfig", "LrtdpState", "lrtdp_plan", "check_solved"]


@dataclass
class LrtdpConfig:
    epsilon: float = 1e-4
    budget: int | None = None          # trials; None runs until the root is labeled
    time_ms: float | None = None
    heuristic: Heuristic = field(default_factory=ZeroHeuristic)
    seed: int = 0
    engine: str = "auto"

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.budget is not None and self.budget < 1:
            raise ValueError("trial budget must be at least 1")
        if self.time_ms is not None and self.time_ms < 0:
            raise ValueError("time budget must be nonnegative")


class LrtdpState:
    """Value table and solved labels; reusable across planning calls."""

    __slots__ = ("values", "solved")

    def __init__(self):
        self.values: dict[NodeId, float] = {}
        self.solved: set[NodeId] = set()


class _Solver:
    def __init__(self, model, heuristic: Heuristic, epsilon: float, table: LrtdpState):
        self.model = model
        self.heuristic = heuristic
        self.epsilon = epsilon
        self.table = table

    def value(self, node: NodeId) -> float:
        v = self.table.values.get(node)
        if v is not None:
            return v
        state, d = node
        kind = self.model.terminal_kind(state)
        if kind == GOAL:
            v = 0.0
            self.table.solved.add(node)
        elif kind == DEAD_END:
            v = self.model.dead_end_value
            self.table.solved.add(node)
        elif d == 0:
            v = 0.0
            self.table.solved.add(node)
        else:
            v = self.heuristic(state, d)
        self.table.values[node] = v
        return v

    def q_values(self, node: NodeId) -> list[float]:
        state, d = node
        _, costs, transitions = self.model.entry(state)
        gamma = self.model.gamma
        qs = []
        for j in range(len(costs)):
            acc = 0.0
            for s2, p in transitions[j]:
                acc += p * self.value(NodeId(s2, d - 1))
            qs.append(costs[j] + gamma * acc)
        return qs

    def greedy(self, qs: list[float]) -> int:
        best = 0
        for j in range(1, len(qs)):
            if qs[j] < qs[best]:
                best = j
        return best

    def trial(self, root: NodeId, rng: SplitMix64) -> None:
        node = root
        path: list[NodeId] = []
        while True:
            self.value(node)  # classify terminals on first touch
            if node in self.table.solved:
                break
            path.append(node)
            qs = self.q_values(node)
            j = self.greedy(qs)
            self.table.values[node] = qs[j]
            state, d = node
            transitions = self.model.entry(state)[2]
            node = NodeId(pick_outcome(transitions[j], rng), d - 1)
        while path:
            if not self.check_solved(path.pop()):
                break

    def check_solved(self, node: NodeId) -> bool:
        """Label ``node`` (and its greedy closure) solved if every residual is
        within tolerance; otherwise Bellman-update the visited nodes."""
        solved = self.table.solved
        values = self.table.values
        ok = True
        open_list: list[NodeId] = []
        seen: set[NodeId] = set()
        closed: list[NodeId] = []
        self.value(node)  # classify before the membership test
        if node not in solved:
            open_list.append(node)
            seen.add(node)
        while open_list:
            n = open_list.pop()
            closed.append(n)
            self.value(n)
            if n in solved:
                continue
            qs = self.q_values(n)
            j = self.greedy(qs)
            if abs(values[n] - qs[j]) > self.epsilon:
                ok = False
                continue
            state, d = n
            transitions = self.model.entry(state)[2]
            for s2, _p in transitions[j]:
                child = NodeId(s2, d - 1)
                self.value(child)
                if child not in solved and child not in seen:
                    seen.add(child)
                    open_list.append(child)
        if ok:
            solved.update(closed)
        else:
            while closed:
                n = closed.pop()
                if n in solved:
                    continue
                qs = self.q_values(n)
                values[n] = qs[self.greedy(qs)]
        return ok


def check_solved(model, table: LrtdpState, node: NodeId, epsilon: float,
                 heuristic: Heuristic | None = None) -> bool:
    """Standalone labeling check over an existing table (testing surface)."""
    context = PlanContext.of(model)
    solver = _Solver(context.cached, heuristic or ZeroHeuristic(), epsilon, table)
    return solver.check_solved(node)


def _plan_pure(context: PlanContext, state: State, horizon: int, cfg: LrtdpConfig,
               table: LrtdpState) -> PlanResult:
    model = context.cached
    rng = SplitMix64(cfg.seed)
    solver = _Solver(model, cfg.heuristic, cfg.epsilon, table)
    root = NodeId(state, horizon)
    deadline = None if cfg.time_ms is None else time.perf_counter() + cfg.time_ms / 1000.0
    start_time = time.perf_counter()
    trials = 0
    while root not in table.solved:
        if cfg.budget is not None and trials >= cfg.budget:
            break
        if deadline is not None and trials > 0 and time.perf_counter() >= deadline:
            break
        solver.trial(root, rng)
        trials += 1

    actions = model.entry(state)[0]
    qs = solver.q_values(root)
    j = solver.greedy(qs)
    stats = PlanStats(
        planner="lrtdp",
        engine="pure",
        iterations=trials,
        nodes_created=len(table.values),
        wall_time_s=time.perf_counter() - start_time,
    )
    return PlanResult(
        action=actions[j],
        value=table.values[root],
        root_q={a: q for a, q in zip(actions, qs)},
        stats=stats,
    )


def _plan_compiled(context: PlanContext, state: State, horizon: int,
                   cfg: LrtdpConfig) -> PlanResult:
    mod = compiled_module()
    start_time = time.perf_counter()
    space = context.space()
    out = mod.lrtdp_plan(
        space,
        state,
        horizon,
        cfg.epsilon,
        -1 if cfg.budget is None else cfg.budget,
        -1.0 if cfg.time_ms is None else cfg.time_ms,
        cfg.seed & ((1 << 64) - 1),
        cfg.heuristic,
    )
    action_index, value, q_list, trials, nodes = out
    actions = context.cached.entry(state)[0]
    stats = PlanStats(
        planner="lrtdp",
        engine="compiled",
        iterations=trials,
        nodes_created=nodes,
        wall_time_s=time.perf_counter() - start_time,
    )
    return PlanResult(
        action=actions[action_index],
        value=value,
        root_q={a: q for a, q in zip(actions, q_list)},
        stats=stats,
    )


def lrtdp_plan(model, state: State, horizon: int, config: LrtdpConfig | None = None,
               table: LrtdpState | None = None) -> PlanResult:
    """Greedy-trial planning from ``(state, horizon)``.

    Runs trials until the root is labeled solved or the budget runs out and
    returns the greedy root action. Pass a :class:`LrtdpState` to retain
    values and labels across successive calls; by default every call starts
    fresh. Table retention is a pure-engine feature.
    """
    cfg = config or LrtdpConfig()
    cfg.validate()
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    context = PlanContext.of(model)
    if context.cached.terminal_kind(state) != 0:
        raise ValueError(f"initial state {state!r} is terminal")
    supported = cfg.heuristic.depth_invariant and table is None
    reason = "table retention" if table is not None else "depth-varying heuristic"
    engine = resolve_engine(cfg.engine, supported, reason)
    if engine == "compiled":
        return _plan_compiled(context, state, horizon, cfg)
    return _plan_pure(context, state, horizon, cfg, table if table is not None else LrtdpState())
