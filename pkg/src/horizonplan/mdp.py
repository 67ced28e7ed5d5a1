"""Core MDP model interface and finite-horizon node identities.

Planners work internally in the cost-minimization convention: action costs are
nonnegative-ish reals, goals are cost-free and absorbing, dead ends carry a
finite penalty ``dead_end_value``. Reward-form models are adapted via
:func:`as_cost_model`.

States are opaque hashable values owned by the domain; equality of the pair
``(state, depth_to_go)`` drives duplicate merging in every planner.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from typing import Any, Hashable, Iterable, NamedTuple, Sequence

from .rng import SplitMix64

Action = Any
State = Hashable

# terminal kinds
NONTERMINAL = 0
GOAL = 1
DEAD_END = 2

PROB_TOL = 1e-9


class NodeId(NamedTuple):
    """Identity of a finite-horizon search node: state plus depth-to-go."""

    state: State
    d: int


class ModelError(ValueError):
    """A model violates the interface contract (bad distribution, etc.)."""


class MdpModel(ABC):
    """Abstract stochastic shortest-path style model.

    Implementations must be immutable after construction (internal memo
    caches are fine); all per-search mutation lives in the planners.
    """

    #: discount in (0, 1]; 1 is allowed only for cost-based goal-terminating
    #: models (``cost_based_termination`` true).
    gamma: float = 1.0

    #: finite penalty assigned to dead-end states.
    dead_end_value: float = 0.0

    #: default lookahead horizon for this domain (CLI/bench fallback).
    default_horizon: int = 50

    @abstractmethod
    def initial_outcomes(self) -> Sequence[tuple[float, State]]:
        """Distribution over initial states as ``(probability, state)``."""

    @abstractmethod
    def actions(self, state: State) -> Sequence[Action]:
        """Applicable actions in stable domain order; empty iff terminal."""

    @abstractmethod
    def cost(self, state: State, action: Action) -> float:
        """Cost of applying ``action`` in ``state``."""

    @abstractmethod
    def transitions(self, state: State, action: Action) -> Sequence[tuple[State, float]]:
        """Successor distribution ``(state', p)`` with p > 0 summing to 1."""

    @abstractmethod
    def is_goal(self, state: State) -> bool:
        """True for cost-free absorbing goal states."""

    def is_dead_end(self, state: State) -> bool:
        """True for non-goal states from which the goal is unreachable."""
        return False

    @property
    def cost_based_termination(self) -> bool:
        """Whether the model declares absorbing cost-free goals (allows gamma=1)."""
        return True

    def terminal_kind(self, state: State) -> int:
        if self.is_goal(state):
            return GOAL
        if self.is_dead_end(state):
            return DEAD_END
        return NONTERMINAL

    def terminal_value(self, state: State) -> float:
        """Fixed value of a terminal state (0 for goals, penalty for dead ends)."""
        return self.dead_end_value if self.terminal_kind(state) == DEAD_END else 0.0

    def state_hash(self, state: State) -> int:
        """Stable (cross-process) 64-bit hash of a state for trace logs."""
        digest = hashlib.blake2b(repr(state).encode(), digest_size=8).digest()
        return int.from_bytes(digest, "big")

    def enumerate_states(self) -> Iterable[State]:
        """All states, for domains small enough to enumerate (optional)."""
        raise NotImplementedError(f"{type(self).__name__} is not enumerable")


class RewardMdp(ABC):
    """Reward-form counterpart of :class:`MdpModel` (maximization)."""

    gamma: float = 1.0
    dead_end_value: float = 0.0
    default_horizon: int = 50

    @abstractmethod
    def initial_outcomes(self) -> Sequence[tuple[float, State]]: ...

    @abstractmethod
    def actions(self, state: State) -> Sequence[Action]: ...

    @abstractmethod
    def reward(self, state: State, action: Action) -> float: ...

    @abstractmethod
    def transitions(self, state: State, action: Action) -> Sequence[tuple[State, float]]: ...

    @abstractmethod
    def is_goal(self, state: State) -> bool: ...

    def is_dead_end(self, state: State) -> bool:
        return False


class _CostView(MdpModel):
    """Cost-form adapter over a reward-form model: c(a,s) = -r(a,s)."""

    def __init__(self, base: RewardMdp):
        self._base = base
        self.gamma = base.gamma
        self.dead_end_value = base.dead_end_value
        self.default_horizon = base.default_horizon

    def initial_outcomes(self):
        return self._base.initial_outcomes()

    def actions(self, state):
        return self._base.actions(state)

    def cost(self, state, action):
        return -self._base.reward(state, action)

    def transitions(self, state, action):
        return self._base.transitions(state, action)

    def is_goal(self, state):
        return self._base.is_goal(state)

    def is_dead_end(self, state):
        return self._base.is_dead_end(state)


def as_cost_model(model: RewardMdp | MdpModel) -> MdpModel:
    """Canonicalize a model to cost form (no-op for cost-form models)."""
    if isinstance(model, MdpModel):
        return model
    return _CostView(model)


class TabularMdp(MdpModel):
    """Explicit in-memory model, used by tests, random suites and `.mdp` files.

    ``spec`` maps each state to a list of ``(action_name, cost, [(succ, p), ...])``
    entries in stable order; terminal states map to an empty list.
    """

    def __init__(
        self,
        spec: dict[State, list[tuple[Action, float, list[tuple[State, float]]]]],
        initial: State,
        goals: set[State] | frozenset[State] = frozenset(),
        dead_ends: set[State] | frozenset[State] = frozenset(),
        gamma: float = 1.0,
        dead_end_value: float = 0.0,
        default_horizon: int = 50,
        name: str = "tabular",
    ):
        self._spec = spec
        self._initial = initial
        self._goals = frozenset(goals)
        self._dead_ends = frozenset(dead_ends)
        self.gamma = gamma
        self.dead_end_value = dead_end_value
        self.default_horizon = default_horizon
        self.name = name

    def initial_outcomes(self):
        return ((1.0, self._initial),)

    def actions(self, state):
        return tuple(a for a, _, _ in self._spec[state])

    def cost(self, state, action):
        for a, c, _ in self._spec[state]:
            if a == action:
                return c
        raise ModelError(f"action {action!r} not applicable in {state!r}")

    def transitions(self, state, action):
        for a, _, succ in self._spec[state]:
            if a == action:
                return tuple(succ)
        raise ModelError(f"action {action!r} not applicable in {state!r}")

    def is_goal(self, state):
        return state in self._goals

    def is_dead_end(self, state):
        if state in self._dead_ends:
            return True
        return state not in self._goals and not self._spec.get(state)

    def enumerate_states(self):
        return self._spec.keys()


def chain2_model() -> TabularMdp:
    """Two-action single-choice model used throughout the test suite.

    From ``x0``: action ``A`` costs 1 and reaches the goal surely; action
    ``B`` costs 0.5 and reaches the goal with probability 0.5, else stays.
    """
    spec = {
        "x0": [
            ("A", 1.0, [("goal", 1.0)]),
            ("B", 0.5, [("goal", 0.5), ("x0", 0.5)]),
        ],
        "goal": [],
    }
    return TabularMdp(spec, initial="x0", goals={"goal"}, default_horizon=2, name="chain2")


def validate_model(model: MdpModel, states: Iterable[State]) -> None:
    """Audit model invariants over the given states; raises ModelError."""
    if not (0.0 < model.gamma <= 1.0):
        raise ModelError(f"gamma {model.gamma} outside (0, 1]")
    if model.gamma == 1.0 and not model.cost_based_termination:
        raise ModelError("gamma = 1 requires declared cost-based termination")
    if model.dead_end_value < 0.0:
        raise ModelError("dead-end penalty must be nonnegative")
    for s in states:
        kind = model.terminal_kind(s)
        acts = model.actions(s)
        if kind != NONTERMINAL:
            if acts:
                raise ModelError(f"terminal state {s!r} has applicable actions")
            continue
        if not acts:
            raise ModelError(f"non-terminal state {s!r} has no actions")
        for a in acts:
            total = 0.0
            for s2, p in model.transitions(s, a):
                if p <= 0.0:
                    raise ModelError(f"non-positive probability on {s!r}/{a!r} -> {s2!r}")
                total += p
            if abs(total - 1.0) > PROB_TOL:
                raise ModelError(f"transition mass {total} on {s!r}/{a!r}")


def sample_successor(model: MdpModel, state: State, action: Action, rng: SplitMix64) -> State:
    """Draw a successor of ``(state, action)``; one RNG draw per call."""
    outcomes = None
    for a in model.actions(state):
        if a == action:
            outcomes = model.transitions(state, action)
            break
    if outcomes is None:
        raise ModelError(f"action {action!r} not applicable in {state!r}")
    return pick_outcome(outcomes, rng)


def pick_outcome(outcomes: Sequence[tuple[State, float]], rng: SplitMix64) -> State:
    """Categorical draw over ``(state, p)`` pairs; exactly one RNG draw."""
    u = rng.next_double()
    acc = 0.0
    last = outcomes[0][0]
    for s2, p in outcomes:
        acc += p
        last = s2
        if u < acc:
            return s2
    return last


class CachedModel(MdpModel):
    """Memoizing wrapper for an immutable model.

    Terminal classification, action lists, costs and transition tables are
    computed once per distinct state and shared by every search over the
    wrapped model (the compiled kernels feed from the same memo).
    """

    def __init__(self, model: MdpModel):
        self.base = model
        self.gamma = model.gamma
        self.dead_end_value = model.dead_end_value
        self.default_horizon = model.default_horizon
        self._kind: dict[State, int] = {}
        self._entry: dict[State, tuple] = {}

    def initial_outcomes(self):
        return self.base.initial_outcomes()

    def terminal_kind(self, state):
        k = self._kind.get(state)
        if k is None:
            k = self.base.terminal_kind(state)
            self._kind[state] = k
        return k

    def is_goal(self, state):
        return self.terminal_kind(state) == GOAL

    def is_dead_end(self, state):
        return self.terminal_kind(state) == DEAD_END

    @property
    def cost_based_termination(self):
        return self.base.cost_based_termination

    def entry(self, state):
        """Memoized ``(actions, costs, transition tables)`` for a state."""
        e = self._entry.get(state)
        if e is None:
            if self.terminal_kind(state) != NONTERMINAL:
                e = ((), (), ())
            else:
                acts = tuple(self.base.actions(state))
                costs = tuple(self.base.cost(state, a) for a in acts)
                trans = tuple(tuple(self.base.transitions(state, a)) for a in acts)
                e = (acts, costs, trans)
            self._entry[state] = e
        return e

    def actions(self, state):
        return self.entry(state)[0]

    def cost(self, state, action):
        acts, costs, _ = self.entry(state)
        for a, c in zip(acts, costs):
            if a == action:
                return c
        raise ModelError(f"action {action!r} not applicable in {state!r}")

    def transitions(self, state, action):
        acts, _, trans = self.entry(state)
        for a, t in zip(acts, trans):
            if a == action:
                return t
        raise ModelError(f"action {action!r} not applicable in {state!r}")

    def state_hash(self, state):
        return self.base.state_hash(state)

    def enumerate_states(self):
        return self.base.enumerate_states()

    #: optional domain hook passthroughs
    def __getattr__(self, name):
        return getattr(self.base, name)


def as_cached(model: MdpModel) -> CachedModel:
    return model if isinstance(model, CachedModel) else CachedModel(model)
