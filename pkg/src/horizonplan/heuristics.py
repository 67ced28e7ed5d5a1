"""Leaf-value estimators and base policies for the planners.

Two families feed unexpanded search nodes:

* deterministic heuristics ``h(state, d)`` (zero, relaxed shortest-path,
  scaled variants, arbitrary callables), and
* sampled sources that roll out a base policy for ``d`` steps and average
  successive samples.

Base policies also drive UCT leaf evaluation. Policies choose by *index*
into the model's stable action order so that the pure and compiled engines
make bit-identical decisions.
"""

from __future__ import annotations

import heapq
from typing import Callable

from .mdp import DEAD_END, GOAL, CachedModel, MdpModel, State, as_cached, pick_outcome
from .rng import SplitMix64


class Heuristic:
    """Deterministic value estimate for ``(state, depth_to_go)`` nodes."""

    #: true when the estimate ignores d (lets engines cache per state).
    depth_invariant = True
    name = "heuristic"

    def __call__(self, state: State, d: int) -> float:
        raise NotImplementedError


class ZeroHeuristic(Heuristic):
    name = "zero"

    def __call__(self, state, d):
        return 0.0


class FunctionHeuristic(Heuristic):
    """Wrap an arbitrary ``fn(state, d)``; assumed depth-dependent."""

    def __init__(self, fn: Callable[[State, int], float], depth_invariant: bool = False,
                 name: str = "fn"):
        self._fn = fn
        self.depth_invariant = depth_invariant
        self.name = name

    def __call__(self, state, d):
        return self._fn(state, d)


class TableHeuristic(Heuristic):
    def __init__(self, table: dict[State, float], default: float = 0.0, name: str = "table"):
        self._table = table
        self._default = default
        self.name = name

    def __call__(self, state, d):
        return self._table.get(state, self._default)


def min_min_table(model: MdpModel) -> dict[State, float]:
    """Optimal cost-to-goal of the all-outcomes-favorable relaxation.

    Each action may pick its cheapest successor, so the relaxation is a
    plain weighted graph solved backward from the goals. With gamma < 1 an
    improved label can undercut an already-settled one, hence the
    label-correcting loop instead of plain Dijkstra.
    """
    states = list(model.enumerate_states())
    gamma = model.gamma
    reverse: dict[State, list[tuple[State, float]]] = {}
    goals = []
    for s in states:
        kind = model.terminal_kind(s)
        if kind == GOAL:
            goals.append(s)
            continue
        if kind == DEAD_END:
            continue
        for a in model.actions(s):
            c = model.cost(s, a)
            for s2, _p in model.transitions(s, a):
                reverse.setdefault(s2, []).append((s, c))
    best: dict[State, float] = {g: 0.0 for g in goals}
    heap = [(0.0, i, g) for i, g in enumerate(goals)]
    heapq.heapify(heap)
    seq = len(goals)
    while heap:
        value, _, s = heapq.heappop(heap)
        if value > best.get(s, float("inf")):
            continue
        for u, c in reverse.get(s, ()):
            cand = c + gamma * value
            if cand < best.get(u, float("inf")) - 1e-15:
                best[u] = cand
                heapq.heappush(heap, (cand, seq, u))
                seq += 1
    return best


class MinMinHeuristic(Heuristic):
    """Relaxed cost-to-goal; admissible for the true finite-horizon values.

    Domains may provide a closed-form ``min_min_value(state)`` hook; otherwise
    the table is computed once over the enumerated state space and cached.
    States the relaxation cannot bring to a goal get the dead-end penalty.
    """

    name = "minmin"

    def __init__(self, model: MdpModel):
        self._model = as_cached(model)
        self._hook = getattr(self._model.base, "min_min_value", None)
        self._table: dict[State, float] | None = None

    def __call__(self, state, d):
        if self._hook is not None:
            return self._hook(state)
        if self._table is None:
            self._table = min_min_table(self._model)
        v = self._table.get(state)
        return self._model.dead_end_value if v is None else v


class ScaledHeuristic(Heuristic):
    """Pointwise multiple of another heuristic."""

    def __init__(self, base: Heuristic, factor: float):
        if factor <= 0.0:
            raise ValueError("scale factor must be positive")
        self._base = base
        self.factor = factor
        self.depth_invariant = base.depth_invariant
        self.name = f"scaled:{factor:g}*{base.name}"

    def __call__(self, state, d):
        return self.factor * self._base(state, d)


class BasePolicy:
    """Action chooser used for rollouts; stateless across calls."""

    #: "random" and "greedy" run natively inside the compiled kernels;
    #: "lookup" policies are deterministic per state and memoized there.
    kind = "lookup"
    name = "policy"

    def choose_index(self, model: CachedModel, state: State, rng: SplitMix64) -> int:
        raise NotImplementedError


class RandomPolicy(BasePolicy):
    """Uniform over applicable actions; one draw per decision."""

    kind = "random"
    name = "random"

    def choose_index(self, model, state, rng):
        acts, _, _ = model.entry(state)
        return rng.next_below(len(acts))


class GreedyPolicy(BasePolicy):
    """Greedy in a depth-invariant heuristic; one draw per decision.

    Scores ``cost(a) + gamma * sum_p p * h(s')`` and draws uniformly among the
    exactly-tied minimizers, which degrades to the uniform random policy when
    the heuristic is zero and costs are equal.
    """

    kind = "greedy"
    name = "greedy"

    def __init__(self, heuristic: Heuristic):
        if not heuristic.depth_invariant:
            raise ValueError("greedy base policy needs a depth-invariant heuristic")
        self.heuristic = heuristic
        self.name = f"greedy:{heuristic.name}"

    def choose_index(self, model, state, rng):
        acts, costs, trans = model.entry(state)
        gamma = model.gamma
        h = self.heuristic
        best = float("inf")
        scores = []
        for j in range(len(acts)):
            acc = 0.0
            for s2, p in trans[j]:
                acc += p * h(s2, 0)
            q = costs[j] + gamma * acc
            scores.append(q)
            if q < best:
                best = q
        ties = [j for j, q in enumerate(scores) if q == best]
        return ties[rng.next_below(len(ties))]


class LookupPolicy(BasePolicy):
    """Deterministic domain policy given as ``fn(state) -> action``."""

    kind = "lookup"

    def __init__(self, fn: Callable[[State], object], name: str = "lookup"):
        self._fn = fn
        self.name = name

    def choose_index(self, model, state, rng):
        action = self._fn(state)
        acts, _, _ = model.entry(state)
        for j, a in enumerate(acts):
            if a == action:
                return j
        raise ValueError(f"policy chose inapplicable action {action!r} in {state!r}")


def simulate_policy(model: CachedModel, policy: BasePolicy, state: State, d: int,
                    rng: SplitMix64) -> float:
    """Accumulated discounted cost of running ``policy`` for ``d`` steps.

    Stops early at terminals: goals contribute nothing, dead ends add the
    discounted penalty. A dead end sitting at the horizon still counts.
    """
    total = 0.0
    disc = 1.0
    gamma = model.gamma
    for _ in range(d):
        kind = model.terminal_kind(state)
        if kind == GOAL:
            return total
        if kind == DEAD_END:
            return total + disc * model.dead_end_value
        acts, costs, trans = model.entry(state)
        j = policy.choose_index(model, state, rng)
        total += disc * costs[j]
        state = pick_outcome(trans[j], rng)
        disc *= gamma
    kind = model.terminal_kind(state)
    if kind == DEAD_END:
        return total + disc * model.dead_end_value
    return total


class HeuristicSource:
    """How unexpanded nodes obtain their values (deterministic or sampled)."""

    sampled = False
    name = "source"

    def initial_value(self, model: CachedModel, state: State, d: int,
                      rng: SplitMix64) -> float:
        raise NotImplementedError

    def sample(self, model: CachedModel, state: State, d: int, rng: SplitMix64) -> float:
        raise NotImplementedError("deterministic source")


class DeterministicSource(HeuristicSource):
    """Fixed heuristic values; fetches are cached, repeat reads are free."""

    def __init__(self, heuristic: Heuristic):
        self.heuristic = heuristic
        self.name = heuristic.name

    def initial_value(self, model, state, d, rng):
        return self.heuristic(state, d)


class RolloutSource(HeuristicSource):
    """Base-policy rollouts; every read of an unexpanded node adds a sample."""

    sampled = True

    def __init__(self, policy: BasePolicy):
        self.policy = policy
        self.name = f"rollout:{policy.name}"

    def initial_value(self, model, state, d, rng):
        return self.sample(model, state, d, rng)

    def sample(self, model, state, d, rng):
        return simulate_policy(model, self.policy, state, d, rng)
