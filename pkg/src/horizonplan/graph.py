"""Explicit AND/OR graph over finite-horizon nodes, with duplicate merging.

The graph explicates part of the implicit horizon-unrolled MDP: OR nodes are
``(state, d)`` pairs where an action gets chosen, AND nodes ``(action, state,
d)`` fan out over stochastic outcomes at depth ``d - 1``. Nodes reached along
several paths are shared (multi-parent), so value propagation runs a worklist
over parent links rather than a simple tree walk.

Float discipline: Bellman sums accumulate ``p * V`` child-by-child in stored
order and apply ``cost + gamma * acc`` last. The compiled engine replays the
same operation order so both produce bit-identical values.
"""

from __future__ import annotations

import heapq
from typing import Iterable, Iterator

from .heuristics import HeuristicSource
from .mdp import DEAD_END, GOAL, CachedModel, NodeId, State
from .rng import SplitMix64

#: value changes at or below this magnitude do not propagate further.
V_CHANGE_TOL = 1e-12


class OrNode:
    """A ``(state, d)`` decision node."""

    __slots__ = (
        "id", "V", "children", "parents", "marked", "expanded", "terminal",
        "kind", "samples", "index", "best_epoch", "delta", "delta_epoch",
    )

    def __init__(self, node_id: NodeId, kind: int, value: float, terminal: bool, index: int):
        self.id = node_id
        self.kind = kind
        self.V = value
        self.terminal = terminal
        self.index = index
        self.children: list[AndNode] = []
        self.parents: list[AndNode] = []
        self.marked: AndNode | None = None
        self.expanded = False
        self.samples = 0
        self.best_epoch = -1
        self.delta = 0.0
        self.delta_epoch = -1

    def is_tip(self) -> bool:
        return not self.expanded and not self.terminal

    def __repr__(self):
        return f"OrNode({self.id.state!r}, d={self.id.d}, V={self.V:.6g})"


class AndNode:
    """An ``(action, state, d)`` chance node below its owning OR node."""

    __slots__ = ("owner", "action", "action_index", "cost", "Q", "children",
                 "delta", "delta_epoch")

    def __init__(self, owner: OrNode, action, action_index: int, cost: float):
        self.owner = owner
        self.action = action
        self.action_index = action_index
        self.cost = cost
        self.Q = 0.0
        self.children: list[tuple[float, OrNode]] = []
        self.delta = 0.0
        self.delta_epoch = -1

    def __repr__(self):
        return f"AndNode({self.action!r} @ {self.owner.id.state!r}, d={self.owner.id.d})"


class ExplicitGraph:
    """Node store with duplicate merging plus per-depth creation registries."""

    def __init__(self, model: CachedModel, horizon: int):
        if horizon < 1:
            raise ValueError("horizon must be at least 1")
        self.model = model
        self.gamma = model.gamma
        self.horizon = horizon
        self.index: dict[NodeId, OrNode] = {}
        self.levels: list[list[OrNode]] = [[] for _ in range(horizon + 1)]
        self.root: OrNode | None = None
        self.counter = 0
        self.epoch = 0
        self.tip_count = 0

    def init_root(self, state: State, source: HeuristicSource, rng: SplitMix64) -> OrNode:
        self.root = get_or_create(self, state, self.horizon, source, rng)
        return self.root

    def nodes(self) -> Iterator[OrNode]:
        """All OR nodes, deepest-horizon level first, creation order within."""
        for level in reversed(self.levels):
            yield from level

    def tips(self) -> Iterator[OrNode]:
        for node in self.nodes():
            if node.is_tip():
                yield node

    def in_best(self, node) -> bool:
        return node.best_epoch == self.epoch


def get_or_create(graph: ExplicitGraph, state: State, d: int,
                  source: HeuristicSource, rng: SplitMix64) -> OrNode:
    """Return the unique node for ``(state, d)``, creating and valuing it once.

    New non-terminal nodes are initialized from the heuristic source (one
    rollout sample for sampled sources); terminal nodes get their fixed value
    and are never expanded.
    """
    node_id = NodeId(state, d)
    node = graph.index.get(node_id)
    if node is not None:
        return node
    model = graph.model
    kind = model.terminal_kind(state)
    if kind == GOAL:
        value, terminal = 0.0, True
    elif kind == DEAD_END:
        value, terminal = model.dead_end_value, True
    elif d == 0:
        value, terminal = 0.0, True
    else:
        value, terminal = 0.0, False
    node = OrNode(node_id, kind, value, terminal, graph.counter)
    graph.counter += 1
    graph.index[node_id] = node
    graph.levels[d].append(node)
    if not terminal:
        node.V = source.initial_value(model, state, d, rng)
        if source.sampled:
            node.samples = 1
        graph.tip_count += 1
    return node


def fetch_tip_value(node: OrNode, model: CachedModel, source: HeuristicSource,
                    rng: SplitMix64) -> float:
    """Read an unexpanded node's value; sampled sources fold in a new sample."""
    if not source.sampled:
        return node.V
    sample = source.sample(model, node.id.state, node.id.d, rng)
    node.V += (sample - node.V) / (node.samples + 1)
    node.samples += 1
    return node.V


def expand(graph: ExplicitGraph, node: OrNode, model: CachedModel,
           source: HeuristicSource, rng: SplitMix64) -> int:
    """Explicate all actions and successors of a tip; returns new node count."""
    if node.expanded:
        raise ValueError(f"{node!r} already expanded")
    if node.terminal:
        raise ValueError(f"{node!r} is terminal")
    actions, costs, transitions = model.entry(node.id.state)
    before = graph.counter
    d = node.id.d
    for j, action in enumerate(actions):
        anode = AndNode(node, action, j, costs[j])
        for succ, p in transitions[j]:
            child = get_or_create(graph, succ, d - 1, source, rng)
            child.parents.append(anode)
            anode.children.append((p, child))
        node.children.append(anode)
    node.expanded = True
    graph.tip_count -= 1
    return graph.counter - before


def update_ancestors(
    graph: ExplicitGraph,
    start: OrNode,
    source: HeuristicSource | None = None,
    rng: SplitMix64 | None = None,
    skip_fetch: frozenset | set = frozenset(),
    shuffle_rng: SplitMix64 | None = None,
) -> set[OrNode]:
    """Propagate value changes from ``start`` up through all parent links.

    For an expanded ``start`` the pass begins by evaluating its own action
    nodes (the post-expansion backup); for a tip it begins at its parents
    (external value change). Recomputing an AND node re-reads each unexpanded
    sampled child, drawing a fresh sample, except for children in
    ``skip_fetch`` (the ones just created by the triggering expansion, whose
    creation sample is already current).

    Returns the set of OR nodes whose value moved by more than the
    propagation tolerance. ``shuffle_rng`` randomizes the worklist pop order
    (the result is order-independent; used by tests).
    """
    model = graph.model
    gamma = graph.gamma
    changed: set[OrNode] = set()
    dirty: dict[OrNode, set[AndNode]] = {}
    heap: list[tuple[int, int, OrNode]] = []
    pool: list[OrNode] = []

    def schedule(anode: AndNode) -> None:
        owner = anode.owner
        bucket = dirty.get(owner)
        if bucket is None:
            bucket = set()
            dirty[owner] = bucket
            if shuffle_rng is None:
                heapq.heappush(heap, (owner.id.d, owner.index, owner))
            else:
                pool.append(owner)
        bucket.add(anode)

    if start.expanded:
        for anode in start.children:
            schedule(anode)
    else:
        for anode in start.parents:
            schedule(anode)

    while dirty:
        if shuffle_rng is None:
            node = heapq.heappop(heap)[2]
            if node not in dirty:
                continue
        else:
            node = pool.pop(shuffle_rng.next_below(len(pool)))
            if node not in dirty:
                continue
        bucket = dirty.pop(node)
        for anode in node.children:
            if anode not in bucket:
                continue
            acc = 0.0
            for p, child in anode.children:
                if (source is not None and source.sampled and child.is_tip()
                        and child not in skip_fetch):
                    fetch_tip_value(child, model, source, rng)
                acc += p * child.V
            anode.Q = anode.cost + gamma * acc
        best = None
        for anode in node.children:
            if best is None or anode.Q < best:
                best = anode.Q
        if node.marked is None or node.marked.Q != best:
            for anode in node.children:
                if anode.Q == best:
                    node.marked = anode
                    break
        if abs(best - node.V) > V_CHANGE_TOL:
            node.V = best
            changed.add(node)
            for anode in node.parents:
                schedule(anode)
        else:
            node.V = best
    return changed


def recompute_best_partial_graph(graph: ExplicitGraph) -> tuple[list[OrNode], list[OrNode]]:
    """Re-derive the subgraph reached through marked actions from the root.

    Flags visited nodes for the current epoch and partitions the unexpanded
    non-terminal tips into those inside the best partial graph and those
    outside it, each ordered deepest level first, then by creation.
    """
    graph.epoch += 1
    epoch = graph.epoch
    stack = [graph.root]
    graph.root.best_epoch = epoch
    while stack:
        node = stack.pop()
        if node.terminal or not node.expanded:
            continue
        anode = node.marked
        for _, child in anode.children:
            if child.best_epoch != epoch:
                child.best_epoch = epoch
                stack.append(child)
    in_tips: list[OrNode] = []
    out_tips: list[OrNode] = []
    for node in graph.nodes():
        if node.is_tip():
            if node.best_epoch == epoch:
                in_tips.append(node)
            else:
                out_tips.append(node)
    return in_tips, out_tips


def audit_bellman(graph: ExplicitGraph, tol: float = 1e-9) -> list[str]:
    """Full-graph consistency audit; returns human-readable violations."""
    problems = []
    gamma = graph.gamma
    for node in graph.nodes():
        if not node.expanded:
            continue
        best = None
        for anode in node.children:
            acc = 0.0
            for p, child in anode.children:
                acc += p * child.V
            q = anode.cost + gamma * acc
            if abs(q - anode.Q) > tol:
                problems.append(f"{anode!r}: stored Q {anode.Q} vs recomputed {q}")
            if best is None or anode.Q < best:
                best = anode.Q
        if abs(node.V - best) > tol:
            problems.append(f"{node!r}: V {node.V} vs min Q {best}")
        if node.marked is None:
            problems.append(f"{node!r}: expanded but unmarked")
        elif abs(node.marked.Q - best) > tol:
            problems.append(f"{node!r}: marked action Q {node.marked.Q} vs best {best}")
    return problems


def dump_graph(graph: ExplicitGraph) -> str:
    """Line-oriented debug dump, stable across runs, for trace diffing."""
    lines = []
    for node in graph.nodes():
        status = "terminal" if node.terminal else ("expanded" if node.expanded else "tip")
        marked = node.marked.action if node.marked is not None else None
        lines.append(
            f"({node.id.state!r},{node.id.d}) V={node.V:.12g} {status} marked={marked!r}"
        )
        for anode in node.children:
            kids = " ".join(
                f"({child.id.state!r},{child.id.d}):{p:.12g}" for p, child in anode.children
            )
            lines.append(f"  {anode.action!r} Q={anode.Q:.12g} -> {kids}")
    return "\n".join(lines)
