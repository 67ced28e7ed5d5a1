"""Road navigation under edge-blocking uncertainty, as a belief MDP.

Each edge of an undirected graph is blocked with a known independent prior;
the true status of an edge can be sensed noise-free from either endpoint.
Belief states pair the agent's location with a per-edge status vector over
{unknown, free, blocked}. Actions are macro moves to any reachable sensing
frontier node (or the target), charged the shortest known-free path cost;
traversal senses every unknown edge incident to a node on the committed
path. A belief is a dead end exactly when the target is unreachable even
with every unknown edge assumed free.
"""

from __future__ import annotations

import heapq
from typing import Iterable, NamedTuple, Sequence

from ..heuristics import LookupPolicy
from ..mdp import MdpModel, ModelError
from ..rng import SplitMix64

UNKNOWN, FREE, BLOCKED = 0, 1, 2


class CtpEdge(NamedTuple):
    u: int
    v: int
    weight: float
    prior: float


class CtpBelief(NamedTuple):
    location: int
    statuses: tuple[int, ...]


class CtpInstance:
    """Static problem data: graph, priors, endpoints."""

    def __init__(self, n: int, edges: Sequence[CtpEdge], source: int, target: int,
                 p_bad: float | None = None, name: str = "ctp"):
        if n < 2:
            raise ModelError("instance needs at least two nodes")
        if not 0 <= source < n or not 0 <= target < n:
            raise ModelError("source/target out of range")
        for e in edges:
            if not (0 <= e.u < n and 0 <= e.v < n) or e.u == e.v:
                raise ModelError(f"bad edge {e}")
            if e.weight <= 0:
                raise ModelError(f"non-positive weight on {e}")
            if not 0.0 <= e.prior < 1.0:
                raise ModelError(f"prior outside [0, 1) on {e}")
        self.n = n
        self.edges = tuple(edges)
        self.source = source
        self.target = target
        self.p_bad = p_bad
        self.name = name
        self.incident: tuple[tuple[int, ...], ...] = tuple(
            tuple(i for i, e in enumerate(self.edges) if node in (e.u, e.v))
            for node in range(n)
        )

    def other_end(self, edge_index: int, node: int) -> int:
        e = self.edges[edge_index]
        return e.v if e.u == node else e.u

    def initial_statuses(self) -> tuple[int, ...]:
        return (UNKNOWN,) * len(self.edges)


def _dijkstra(instance: CtpInstance, statuses: Sequence[int], origin: int,
              optimistic: bool) -> tuple[dict[int, float], dict[int, int]]:
    """Shortest paths over known-free (optionally plus unknown) edges.

    Deterministic: heap ties resolve by node id and parents change only on
    strict improvement, so extracted paths are reproducible.
    """
    dist = {origin: 0.0}
    parent: dict[int, int] = {}
    heap = [(0.0, origin)]
    done: set[int] = set()
    while heap:
        d, node = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        for ei in instance.incident[node]:
            status = statuses[ei]
            if status == BLOCKED or (status == UNKNOWN and not optimistic):
                continue
            other = instance.other_end(ei, node)
            cand = d + instance.edges[ei].weight
            if cand < dist.get(other, float("inf")):
                dist[other] = cand
                parent[other] = node
                heapq.heappush(heap, (cand, other))
    return dist, parent


def _extract_path(parent: dict[int, int], origin: int, node: int) -> tuple[int, ...]:
    path = [node]
    while node != origin:
        node = parent[node]
        path.append(node)
    path.reverse()
    return tuple(path)


def target_reachable(instance: CtpInstance, statuses: Sequence[int], origin: int) -> bool:
    """Optimistic reachability: unknown edges count as traversable."""
    dist, _ = _dijkstra(instance, statuses, origin, optimistic=True)
    return instance.target in dist


class CtpModel(MdpModel):
    """Belief MDP over a :class:`CtpInstance` (actions are target node ids)."""

    def __init__(self, instance: CtpInstance, dead_end_value: float | None = None):
        self.instance = instance
        self.gamma = 1.0
        total = sum(e.weight for e in instance.edges)
        self.dead_end_value = 2.0 * total if dead_end_value is None else dead_end_value
        self.default_horizon = instance.n
        self.name = instance.name

    def initial_outcomes(self):
        instance = self.instance
        belief = CtpBelief(instance.source, instance.initial_statuses())
        if instance.source == instance.target:
            return ((1.0, belief),)
        outcomes = []
        for p, statuses in _sense_outcomes(instance, belief.statuses, (instance.source,)):
            outcomes.append((p, CtpBelief(instance.source, statuses)))
        return tuple(outcomes)

    def is_goal(self, belief: CtpBelief) -> bool:
        return belief.location == self.instance.target

    def is_dead_end(self, belief: CtpBelief) -> bool:
        if belief.location == self.instance.target:
            return False
        return not target_reachable(self.instance, belief.statuses, belief.location)

    def actions(self, belief: CtpBelief) -> tuple[int, ...]:
        if self.terminal_kind(belief) != 0:
            return ()
        instance = self.instance
        dist, _ = _dijkstra(instance, belief.statuses, belief.location, optimistic=False)
        frontier = []
        for node in sorted(dist):
            if node == belief.location:
                continue
            if node == instance.target:
                frontier.append(node)
                continue
            if any(belief.statuses[ei] == UNKNOWN for ei in instance.incident[node]):
                frontier.append(node)
        return tuple(frontier)

    def cost(self, belief: CtpBelief, action: int) -> float:
        cost, _ = self._macro(belief, action)
        return cost

    def transitions(self, belief: CtpBelief, action: int):
        _, path = self._macro(belief, action)
        outcomes = []
        for p, statuses in _sense_outcomes(self.instance, belief.statuses, path):
            outcomes.append((CtpBelief(action, statuses), p))
        return tuple(outcomes)

    def _macro(self, belief: CtpBelief, action: int) -> tuple[float, tuple[int, ...]]:
        dist, parent = _dijkstra(self.instance, belief.statuses, belief.location,
                                 optimistic=False)
        if action not in dist:
            raise ModelError(f"move to {action} unreachable from {belief.location}")
        return dist[action], _extract_path(parent, belief.location, action)

    def min_min_value(self, belief: CtpBelief) -> float:
        """Relaxed cost-to-goal: all sensing turns out favorable, so the
        optimum of the relaxation is the optimistic shortest-path distance."""
        if belief.location == self.instance.target:
            return 0.0
        dist, _ = _dijkstra(self.instance, belief.statuses, belief.location, optimistic=True)
        d = dist.get(self.instance.target)
        return self.dead_end_value if d is None else d

    def optimistic_action(self, belief: CtpBelief) -> int:
        """First frontier move on the all-unknown-edges-free shortest path."""
        instance = self.instance
        dist, parent = _dijkstra(instance, belief.statuses, belief.location, optimistic=True)
        if instance.target not in dist:
            raise ModelError(f"no optimistic path from {belief.location}")
        path = _extract_path(parent, belief.location, instance.target)
        move = path[-1]
        for i in range(len(path) - 1):
            a, b = path[i], path[i + 1]
            ei = _edge_between(instance, a, b)
            if belief.statuses[ei] == UNKNOWN:
                move = a
                break
        return move


def _edge_between(instance: CtpInstance, a: int, b: int) -> int:
    for ei in instance.incident[a]:
        if instance.other_end(ei, a) == b:
            return ei
    raise ModelError(f"no edge between {a} and {b}")


def _sense_outcomes(instance: CtpInstance, statuses: tuple[int, ...],
                    visited: Sequence[int]):
    """Joint outcomes of sensing every unknown edge incident to ``visited``.

    Independent per-edge priors; outcomes enumerated in binary-counter order
    over the newly sensed edges (bit set = blocked) and merged on identical
    status vectors.
    """
    nodes = set(visited)
    newly = [ei for ei, e in enumerate(instance.edges)
             if statuses[ei] == UNKNOWN and (e.u in nodes or e.v in nodes)]
    if not newly:
        return ((1.0, statuses),)
    merged: dict[tuple[int, ...], float] = {}
    for bits in range(1 << len(newly)):
        prob = 1.0
        out = list(statuses)
        for i, ei in enumerate(newly):
            q = instance.edges[ei].prior
            if bits >> i & 1:
                prob *= q
                out[ei] = BLOCKED
            else:
                prob *= 1.0 - q
                out[ei] = FREE
        if prob > 0.0:
            key = tuple(out)
            merged[key] = merged.get(key, 0.0) + prob
    return tuple((p, statuses) for statuses, p in merged.items())


def optimistic_policy(model: CtpModel) -> LookupPolicy:
    return LookupPolicy(model.optimistic_action, name="optimistic")


# --- weather handling (episode execution) ---------------------------------

def sample_weather(instance: CtpInstance, rng: SplitMix64) -> tuple[bool, ...]:
    """Edge realization drawn from the priors; one draw per edge in order."""
    return tuple(rng.next_double() < e.prior for e in instance.edges)


def weather_solvable(instance: CtpInstance, weather: Sequence[bool]) -> bool:
    statuses = tuple(BLOCKED if blocked else FREE for blocked in weather)
    return target_reachable(instance, statuses, instance.source)


def enumerate_weathers(instance: CtpInstance) -> Iterable[tuple[float, tuple[bool, ...]]]:
    m = len(instance.edges)
    for bits in range(1 << m):
        prob = 1.0
        weather = []
        for ei in range(m):
            q = instance.edges[ei].prior
            blocked = bool(bits >> ei & 1)
            prob *= q if blocked else 1.0 - q
            weather.append(blocked)
        if prob > 0.0:
            yield prob, tuple(weather)


def sense(instance: CtpInstance, statuses: tuple[int, ...], visited: Sequence[int],
          weather: Sequence[bool]) -> tuple[int, ...]:
    """Resolve unknown edges incident to ``visited`` against a fixed weather."""
    nodes = set(visited)
    out = list(statuses)
    for ei, e in enumerate(instance.edges):
        if out[ei] == UNKNOWN and (e.u in nodes or e.v in nodes):
            out[ei] = BLOCKED if weather[ei] else FREE
    return tuple(out)


def initial_belief(instance: CtpInstance, weather: Sequence[bool]) -> CtpBelief:
    statuses = sense(instance, instance.initial_statuses(), (instance.source,), weather)
    return CtpBelief(instance.source, statuses)


def execute(model: CtpModel, belief: CtpBelief, action: int,
            weather: Sequence[bool]) -> tuple[CtpBelief, float]:
    """Apply a macro move against the true weather; returns (belief', cost)."""
    cost, path = model._macro(belief, action)
    statuses = sense(model.instance, belief.statuses, path, weather)
    return CtpBelief(action, statuses), cost


# --- exact bad-weather probability and generation --------------------------

class _Dsu:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def copy(self) -> "_Dsu":
        dup = _Dsu.__new__(_Dsu)
        dup.parent = self.parent[:]
        return dup


def probability_bad_weather(instance: CtpInstance, exact_edge_limit: int = 20,
                            mc_samples: int = 100_000, seed: int = 0) -> float:
    """P(source and target disconnected under the priors).

    Exact by recursive edge conditioning (with early exit once the terminals
    join) up to ``exact_edge_limit`` edges, Monte Carlo beyond.
    """
    m = len(instance.edges)
    if m <= exact_edge_limit:
        edges = instance.edges

        def rec(i: int, dsu: _Dsu) -> float:
            if dsu.find(instance.source) == dsu.find(instance.target):
                return 0.0
            if i == m:
                return 1.0
            e = edges[i]
            blocked = e.prior * rec(i + 1, dsu)
            free_dsu = dsu.copy()
            free_dsu.union(e.u, e.v)
            return blocked + (1.0 - e.prior) * rec(i + 1, free_dsu)

        return rec(0, _Dsu(instance.n))
    rng = SplitMix64(seed)
    bad = 0
    for _ in range(mc_samples):
        if not weather_solvable(instance, sample_weather(instance, rng)):
            bad += 1
    return bad / mc_samples


def generate_instance(n: int, density: float = 1.5,
                      prior_range: tuple[float, float] = (0.1, 0.5),
                      seed: int = 0,
                      weight_range: tuple[int, int] = (1, 10)) -> CtpInstance:
    """Random connected instance with integer weights and uniform priors.

    ``density`` is the target edge/node ratio; the instance is annotated with
    its exact (or sampled, for large m) bad-weather probability.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    rng = SplitMix64(seed)
    lo_w, hi_w = weight_range
    lo_q, hi_q = prior_range
    pairs: set[tuple[int, int]] = set()
    edges: list[CtpEdge] = []

    def add(u: int, v: int) -> None:
        if u > v:
            u, v = v, u
        pairs.add((u, v))
        weight = float(lo_w + rng.next_below(hi_w - lo_w + 1))
        prior = lo_q + (hi_q - lo_q) * rng.next_double()
        edges.append(CtpEdge(u, v, weight, prior))

    for node in range(1, n):
        add(node, rng.next_below(node))
    target_m = max(n - 1, int(density * n))
    max_m = n * (n - 1) // 2
    attempts = 0
    while len(edges) < min(target_m, max_m) and attempts < 50 * target_m:
        attempts += 1
        u = rng.next_below(n)
        v = rng.next_below(n)
        if u == v:
            continue
        if (min(u, v), max(u, v)) in pairs:
            continue
        add(u, v)
    edges.sort(key=lambda e: (e.u, e.v))
    instance = CtpInstance(n, edges, source=0, target=n - 1, name=f"ctp-{n}-{seed}")
    instance.p_bad = probability_bad_weather(instance, seed=seed)
    return instance


# --- file format ------------------------------------------------------------

def format_instance(instance: CtpInstance) -> str:
    lines = []
    if instance.p_bad is not None:
        lines.append(f"# pbad {instance.p_bad!r}")
    lines.append(f"ctp {instance.n} {len(instance.edges)} {instance.source} {instance.target}")
    for e in instance.edges:
        lines.append(f"{e.u} {e.v} {e.weight!r} {e.prior!r}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str, name: str = "ctp") -> CtpInstance:
    p_bad = None
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] == "pbad":
                p_bad = float(parts[1])
            continue
        rows.append(line.split())
    if not rows or rows[0][0] != "ctp":
        raise ModelError("not a ctp instance file")
    _, n, m, source, target = rows[0]
    n, m, source, target = int(n), int(m), int(source), int(target)
    if len(rows) - 1 != m:
        raise ModelError(f"expected {m} edge lines, found {len(rows) - 1}")
    edges = []
    for row in rows[1:]:
        if len(row) != 4:
            raise ModelError(f"bad edge line {' '.join(row)!r}")
        edges.append(CtpEdge(int(row[0]), int(row[1]), float(row[2]), float(row[3])))
    return CtpInstance(n, edges, source, target, p_bad=p_bad, name=name)
