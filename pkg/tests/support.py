"""Shared test fixtures: random model suites and independent oracles.

The oracles here are deliberately written against the raw problem
definitions (weather enumeration, explicit recursion) rather than through
the library's model machinery, so they can arbitrate its results.
"""

from __future__ import annotations

import heapq
import math
from fractions import Fraction

from horizonplan.domains.ctp import BLOCKED, FREE, UNKNOWN, CtpEdge, CtpInstance
from horizonplan.mdp import TabularMdp
from horizonplan.rng import SplitMix64


def random_mdp(seed: int, max_states: int = 8, max_actions: int = 3,
               gammas: tuple[float, ...] = (1.0, 0.95)) -> TabularMdp:
    """Small random cost model with absorbing goals.

    States whose all-outcomes-favorable relaxation cannot reach a goal are
    genuine dead ends and are marked as such (keeps the relaxed heuristic
    admissible everywhere). The initial state is guaranteed non-terminal.
    """
    rng = SplitMix64(seed)
    for attempt in range(100):
        n = 3 + int(rng.next_below(max_states - 2))
        states = [f"s{i}" for i in range(n)]
        goals = {states[-1]}
        if n > 4 and rng.next_below(4) == 0:
            goals.add(states[-2])
        gamma = gammas[rng.next_below(len(gammas))]
        spec: dict = {g: [] for g in goals}
        for s in states:
            if s in goals:
                continue
            entries = []
            for a in range(1 + int(rng.next_below(max_actions))):
                cost = 5.0 * rng.next_double()
                k = 1 + int(rng.next_below(min(3, n)))
                succ_states = []
                while len(succ_states) < k:
                    cand = states[rng.next_below(n)]
                    if cand not in succ_states:
                        succ_states.append(cand)
                weights = [0.05 + rng.next_double() for _ in succ_states]
                total = sum(weights)
                entries.append((f"a{a}", cost, [(s2, w / total)
                                                for s2, w in zip(succ_states, weights)]))
            spec[s] = entries
        # relaxed reachability toward goals; strand the rest as dead ends
        reached = set(goals)
        changed = True
        while changed:
            changed = False
            for s, entries in spec.items():
                if s in reached:
                    continue
                for _, _, succ in entries:
                    if any(s2 in reached for s2, _ in succ):
                        reached.add(s)
                        changed = True
                        break
        dead = {s for s in states if s not in reached}
        for s in dead:
            spec[s] = []
        if states[0] in goals or states[0] in dead:
            rng = SplitMix64(seed + 1_000_003 * (attempt + 1))
            continue
        return TabularMdp(
            spec, initial=states[0], goals=goals, dead_ends=dead, gamma=gamma,
            dead_end_value=2.0 + 8.0 * rng.next_double(),
            default_horizon=5, name=f"rand{seed}",
        )
    raise AssertionError("could not generate a usable random model")


def diamond_ctp(prior: float = 0.5, weight: float = 1.0) -> CtpInstance:
    """Two disjoint two-edge routes between the endpoints."""
    edges = [CtpEdge(0, 1, weight, prior), CtpEdge(0, 2, weight, prior),
             CtpEdge(1, 3, weight, prior), CtpEdge(2, 3, weight, prior)]
    return CtpInstance(4, edges, 0, 3, name="diamond")


# --- independent road-navigation oracles -----------------------------------

def enumerate_weathers(instance: CtpInstance):
    m = len(instance.edges)
    for bits in range(1 << m):
        prob = 1.0
        weather = []
        for ei in range(m):
            blocked = bool(bits >> ei & 1)
            q = instance.edges[ei].prior
            prob *= q if blocked else 1.0 - q
            weather.append(blocked)
        yield prob, tuple(weather)


def bad_weather_probability_enumerated(instance: CtpInstance) -> float:
    """Exhaustive weather enumeration with exact rational arithmetic."""
    total = Fraction(0)
    for _, weather in enumerate_weathers(instance):
        if not _connected(instance, weather):
            prob = Fraction(1)
            for ei, blocked in enumerate(weather):
                q = Fraction(instance.edges[ei].prior)
                prob *= q if blocked else 1 - q
            total += prob
    return float(total)


def _connected(instance: CtpInstance, weather) -> bool:
    seen = {instance.source}
    stack = [instance.source]
    while stack:
        node = stack.pop()
        if node == instance.target:
            return True
        for ei in instance.incident[node]:
            if weather[ei]:
                continue
            other = instance.other_end(ei, node)
            if other not in seen:
                seen.add(other)
                stack.append(other)
    return False


def ctp_expectimax(instance: CtpInstance, horizon: int, dead_end_value: float) -> float:
    """Optimal expected cost via recursion over weather partitions.

    Re-derives beliefs from the set of consistent weathers rather than from
    the library's belief transitions, providing an independent value for the
    initial expectation (including unsolvable-weather mass at the penalty).
    """
    weathers = list(enumerate_weathers(instance))
    memo: dict = {}

    def statuses_of(consistent):
        m = len(instance.edges)
        out = []
        for ei in range(m):
            vals = {w[ei] for _, w in consistent}
            if vals == {True}:
                out.append(BLOCKED)
            elif vals == {False}:
                out.append(FREE)
            else:
                out.append(UNKNOWN)
        return tuple(out)

    def known_free_paths(statuses, origin):
        dist = {origin: 0.0}
        parent = {}
        heap = [(0.0, origin)]
        done = set()
        while heap:
            d0, node = heapq.heappop(heap)
            if node in done:
                continue
            done.add(node)
            for ei in instance.incident[node]:
                if statuses[ei] != FREE:
                    continue
                other = instance.other_end(ei, node)
                cand = d0 + instance.edges[ei].weight
                if cand < dist.get(other, math.inf) - 0.0:
                    dist[other] = cand
                    parent[other] = node
                    heapq.heappush(heap, (cand, other))
        return dist, parent

    def optimistic_reachable(statuses, origin):
        seen = {origin}
        stack = [origin]
        while stack:
            node = stack.pop()
            for ei in instance.incident[node]:
                if statuses[ei] == BLOCKED:
                    continue
                other = instance.other_end(ei, node)
                if other not in seen:
                    seen.add(other)
                    stack.append(other)
        return seen

    def value(loc, consistent, d):
        if loc == instance.target:
            return 0.0
        statuses = statuses_of(consistent)
        key = (loc, statuses, d)
        if key in memo:
            return memo[key]
        if instance.target not in optimistic_reachable(statuses, loc):
            memo[key] = dead_end_value
            return dead_end_value
        if d == 0:
            memo[key] = 0.0
            return 0.0
        dist, parent = known_free_paths(statuses, loc)
        best = math.inf
        for v in sorted(dist):
            if v == loc:
                continue
            frontier = v == instance.target or any(
                statuses[ei] == UNKNOWN for ei in instance.incident[v])
            if not frontier:
                continue
            path = [v]
            while path[-1] != loc:
                path.append(parent[path[-1]])
            sensed = set(path)
            sense_edges = [ei for ei, e in enumerate(instance.edges)
                           if statuses[ei] == UNKNOWN and (e.u in sensed or e.v in sensed)]
            groups: dict = {}
            for p, w in consistent:
                sig = tuple(w[ei] for ei in sense_edges)
                groups.setdefault(sig, []).append((p, w))
            total_mass = sum(p for p, _ in consistent)
            expected = 0.0
            for group in groups.values():
                mass = sum(p for p, _ in group)
                expected += (mass / total_mass) * value(v, group, d - 1)
            cand = dist[v] + expected
            if cand < best:
                best = cand
        memo[key] = best
        return best

    # initial sensing at the source
    groups: dict = {}
    source_edges = list(instance.incident[instance.source])
    for p, w in weathers:
        sig = tuple(w[ei] for ei in source_edges)
        groups.setdefault(sig, []).append((p, w))
    total = 0.0
    for group in groups.values():
        mass = sum(p for p, _ in group)
        total += mass * value(instance.source, group, horizon)
    return total
