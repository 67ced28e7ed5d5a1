"""Anytime AND/OR graph search (classic AO* plus the anytime variant).

The anytime planner alternates batched tip selection with full Bellman
maintenance of the explicit graph. Tips are scored by an impact measure
``delta``: the minimal change to a node's value that would alter the best
partial graph. Selection draws tips from inside the best partial graph with
probability ``1 - p`` and from outside it otherwise, so non-admissible (even
sampled) heuristics still converge to the optimum once the graph is fully
explicated.

Degenerate probabilities pin a single side: ``p = 0`` never touches outside
tips (and therefore terminates exactly like classic AO*, when the best
partial graph has no tips left), ``p = 1`` mirrors that for outside tips.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field, replace
from heapq import nsmallest
from typing import Any, Callable

from ._engine import PlanContext, compiled_module, resolve_engine
from .graph import (
    AndNode,
    ExplicitGraph,
    OrNode,
    expand,
    fetch_tip_value,
    recompute_best_partial_graph,
    update_ancestors,
)
from .heuristics import (
    DeterministicSource,
    FunctionHeuristic,
    Heuristic,
    HeuristicSource,
    ZeroHeuristic,
)
from .mdp import State
from .results import PlanResult, PlanStats
from .rng import SplitMix64

__all__ = [
    "AotConfig",
    "DeltaScore",
    "aot_plan",
    "ao_star",
    "compute_deltas",
    "select_tips",
    "fetch_tip_value",
]


@dataclass
class AotConfig:
    """Tunables for the anytime planner.

    ``budget`` counts expansions; ``None`` with no time budget means run to
    exhaustion. The selection batch defaults to ``batch_fraction`` of the
    expansion budget (at least 1), or 100 under a pure wall-clock budget.
    """

    p: float = 0.5
    budget: int | None = None
    time_ms: float | None = None
    batch_size: int | None = None
    batch_fraction: float = 0.1
    heuristic: HeuristicSource = field(default_factory=lambda: DeterministicSource(ZeroHeuristic()))
    seed: int = 0
    engine: str = "auto"
    record_trace: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.budget is not None and self.budget < 1:
            raise ValueError("expansion budget must be at least 1")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ValueError("batch fraction must lie in (0, 1]")
        if self.time_ms is not None and self.time_ms < 0:
            raise ValueError("time budget must be nonnegative")

    def effective_batch(self) -> int:
        if self.batch_size is not None:
            return self.batch_size
        if self.budget is not None:
            return max(1, int(self.batch_fraction * self.budget))
        return 100


class DeltaScore:
    """Impact values of the explicit graph after one scoring pass."""

    def __init__(self, graph: ExplicitGraph, in_tips: list[OrNode], out_tips: list[OrNode],
                 epoch: int):
        self._graph = graph
        self._epoch = epoch
        self.in_tips = in_tips
        self.out_tips = out_tips

    def of(self, node: OrNode | AndNode) -> float:
        if node.delta_epoch != self._epoch:
            raise KeyError(f"{node!r} was not scored in this pass")
        return node.delta

    def in_best_graph(self, node: OrNode) -> bool:
        return node.best_epoch == self._graph.epoch


def compute_deltas(graph: ExplicitGraph) -> DeltaScore:
    """Score every node top-down with the minimal best-graph-altering change.

    The root is unconditionally at infinity. A child action node of a node
    inside the best partial graph scores ``V - Q`` when it is not the marked
    action (it must gain that much) and ``min(delta(parent), runner-up gap)``
    when it is; below a node outside the best partial graph the parent's
    deficit accumulates. Outcome nodes divide by ``gamma * p``: the smaller
    the weight by which a child contributes, the larger the value change it
    needs. Nodes reached along several paths keep the smallest-magnitude
    score.
    """
    in_tips, out_tips = recompute_best_partial_graph(graph)
    epoch = graph.epoch
    gamma = graph.gamma
    root = graph.root
    root.delta = math.inf
    root.delta_epoch = epoch
    for level in reversed(graph.levels):
        for node in level:
            if node.delta_epoch != epoch or node.terminal or not node.expanded:
                continue
            value = node.V
            node_delta = node.delta
            inside = node.best_epoch == epoch
            marked = node.marked
            for anode in node.children:
                if inside:
                    if anode is marked:
                        runner_up = math.inf
                        for other in node.children:
                            if other is not anode and other.Q - value < runner_up:
                                runner_up = other.Q - value
                        delta = node_delta if node_delta < runner_up else runner_up
                    else:
                        delta = value - anode.Q
                else:
                    delta = node_delta + (value - anode.Q)
                anode.delta = delta
                anode.delta_epoch = epoch
                for p, child in anode.children:
                    cand = delta / (gamma * p)
                    if child.delta_epoch != epoch or abs(cand) < abs(child.delta):
                        child.delta = cand
                        child.delta_epoch = epoch
    return DeltaScore(graph, in_tips, out_tips, epoch)


def select_tips(graph: ExplicitGraph, deltas: DeltaScore, n: int, p: float,
                rng: SplitMix64) -> list[OrNode]:
    """Pick up to ``n`` distinct tips, smallest impact magnitude first.

    Two bounded priority queues hold the best ``n`` tips inside and outside
    the best partial graph. Each pick draws a side (outside with probability
    ``p``, one draw per pick) and falls back to the other queue when the
    chosen one is empty; with a degenerate ``p`` the excluded side is never
    consulted, so exhausting the pinned side ends selection. An empty result
    signals that the search is complete.
    """
    key = lambda t: (abs(t.delta), t.index)
    in_q = deque(nsmallest(n, deltas.in_tips, key=key))
    out_q = deque(nsmallest(n, deltas.out_tips, key=key))
    picked: list[OrNode] = []
    for _ in range(n):
        if not in_q and not out_q:
            break
        if p <= 0.0:
            want_out = False
        elif p >= 1.0:
            want_out = True
        else:
            want_out = rng.next_double() < p
        if want_out:
            queue = out_q if out_q else (in_q if 0.0 < p < 1.0 else None)
        else:
            queue = in_q if in_q else (out_q if 0.0 < p < 1.0 else None)
        if queue is None:
            break
        picked.append(queue.popleft())
    return picked


def _plan_pure(context: PlanContext, state: State, horizon: int, cfg: AotConfig) -> PlanResult:
    model = context.cached
    rng = SplitMix64(cfg.seed)
    source = cfg.heuristic
    graph = ExplicitGraph(model, horizon)
    root = graph.init_root(state, source, rng)
    if root.terminal:
        raise ValueError(f"initial state {state!r} is terminal")
    batch = cfg.effective_batch()
    budget = cfg.budget
    deadline = None if cfg.time_ms is None else time.perf_counter() + cfg.time_ms / 1000.0
    start_time = time.perf_counter()
    expansions = 0
    delta_passes = 0
    trace: list = [] if cfg.record_trace else None

    while True:
        if budget is not None and expansions >= budget:
            break
        if deadline is not None and expansions > 0 and time.perf_counter() >= deadline:
            break
        deltas = compute_deltas(graph)
        delta_passes += 1
        take = batch if budget is None else min(batch, budget - expansions)
        tips = select_tips(graph, deltas, take, cfg.p, rng)
        if not tips:
            break
        for tip in tips:
            if deadline is not None and expansions > 0 and time.perf_counter() >= deadline:
                break
            before = graph.counter
            expand(graph, tip, model, source, rng)
            expansions += 1
            if trace is not None:
                trace.append(tip.id)
            fresh = {
                child
                for anode in tip.children
                for _, child in anode.children
                if child.index >= before
            }
            update_ancestors(graph, tip, source, rng, skip_fetch=fresh)

    root_q = {anode.action: anode.Q for anode in root.children}
    action = root.marked.action if root.marked is not None else None
    stats = PlanStats(
        planner="aot",
        engine="pure",
        iterations=expansions,
        nodes_created=graph.counter,
        delta_passes=delta_passes,
        wall_time_s=time.perf_counter() - start_time,
        trace=trace,
    )
    return PlanResult(action=action, value=root.V, root_q=root_q, stats=stats)


def _compiled_support(source: HeuristicSource) -> tuple[bool, str]:
    if not source.sampled:
        if source.heuristic.depth_invariant:
            return True, ""
        return False, "depth-varying heuristic"
    kind = source.policy.kind
    if kind in ("random", "greedy", "lookup"):
        return True, ""
    return False, f"unsupported base policy kind {kind!r}"


def _source_spec(source: HeuristicSource):
    """Translate a heuristic source into the compiled kernel's descriptor.

    Stable objects (not closures) so the kernel can key its per-state value
    caches by them across repeated planning calls.
    """
    if not source.sampled:
        return ("det", source.heuristic)
    policy = source.policy
    if policy.kind == "random":
        return ("random", None)
    if policy.kind == "greedy":
        return ("greedy", policy.heuristic)
    return ("lookup", policy)


def _plan_compiled(context: PlanContext, state: State, horizon: int, cfg: AotConfig) -> PlanResult:
    mod = compiled_module()
    start_time = time.perf_counter()
    space = context.space()
    out = mod.aot_plan(
        space,
        state,
        horizon,
        cfg.p,
        -1 if cfg.budget is None else cfg.budget,
        cfg.effective_batch(),
        -1.0 if cfg.time_ms is None else cfg.time_ms,
        cfg.seed & ((1 << 64) - 1),
        _source_spec(cfg.heuristic),
        1 if cfg.record_trace else 0,
    )
    action_index, value, q_list, expansions, nodes, passes, trace_raw = out
    actions = context.cached.entry(state)[0]
    root_q = {actions[j]: q for j, q in enumerate(q_list)}
    action = None if action_index < 0 else actions[action_index]
    trace = None
    if cfg.record_trace:
        trace = [context.node_id(sid, d) for sid, d in trace_raw]
    stats = PlanStats(
        planner="aot",
        engine="compiled",
        iterations=expansions,
        nodes_created=nodes,
        delta_passes=passes,
        wall_time_s=time.perf_counter() - start_time,
        trace=trace,
    )
    return PlanResult(action=action, value=value, root_q=root_q, stats=stats)


def aot_plan(model, state: State, horizon: int, config: AotConfig | None = None) -> PlanResult:
    """Anytime action selection from ``(state, horizon)``.

    Runs until the expansion/time budget is exhausted or no unexpanded
    non-terminal node remains anywhere in the explicit graph, then reports
    the marked root action with the root Q table. With unlimited budget the
    returned value is optimal regardless of the heuristic source.
    """
    cfg = config or AotConfig()
    cfg.validate()
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    context = PlanContext.of(model)
    if context.cached.terminal_kind(state) != 0:
        raise ValueError(f"initial state {state!r} is terminal")
    supported, reason = _compiled_support(cfg.heuristic)
    engine = resolve_engine(cfg.engine, supported, reason)
    if engine == "compiled":
        return _plan_compiled(context, state, horizon, cfg)
    return _plan_pure(context, state, horizon, cfg)


def ao_star(model, state: State, horizon: int,
            heuristic: Heuristic | Callable[[State, int], float],
            config: AotConfig | None = None) -> PlanResult:
    """Classic AO* with an admissible heuristic (admissibility is asserted by
    the caller; it is what makes the returned value optimal).

    Only tips inside the best partial graph are expanded, smallest impact
    magnitude first, and the search stops once the best partial graph has no
    unexpanded non-terminal tips.
    """
    if not isinstance(heuristic, Heuristic):
        heuristic = FunctionHeuristic(heuristic)
    base = config or AotConfig()
    cfg = replace(base, p=0.0, heuristic=DeterministicSource(heuristic))
    result = aot_plan(model, state, horizon, cfg)
    result.stats.planner = "ao"
    return result
