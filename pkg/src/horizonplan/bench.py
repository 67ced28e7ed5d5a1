"""Episode runner and quality-profile harness.

An episode repeatedly plans from the current state with a fixed per-decision
budget, executes the recommended action, and samples the outcome, until the
goal is reached, a dead end is declared, or the step cap hits. Environment
randomness (weather, outcome draws) is split from planner randomness so runs
are reproducible from ``(master seed, episode index)`` alone.

Accounting: executed action costs accumulate undiscounted; episodes that end
without reaching the goal (dead end, step cap, or planner failure) add the
model's dead-end penalty so averages stay finite and comparable. Episode
batches run sequentially; CSV rows are keyed by episode index either way.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from ._engine import PlanContext
from .aot import AotConfig, aot_plan
from .domains import ctp as ctp_domain
from .heuristics import (
    BasePolicy,
    DeterministicSource,
    GreedyPolicy,
    Heuristic,
    MinMinHeuristic,
    RandomPolicy,
    RolloutSource,
    ScaledHeuristic,
    ZeroHeuristic,
)
from .lrtdp import LrtdpConfig, LrtdpState, lrtdp_plan
from .mdp import DEAD_END, GOAL, State, pick_outcome
from .results import PlanResult
from .rng import SplitMix64, derive_seed
from .uct import UctConfig, uct_plan

CSV_HEADER = ("planner", "instance", "budget_kind", "budget", "episodes",
              "avg_time_per_action_s", "avg_cost", "std_err", "cap_hits")

ALGORITHMS = ("aot", "ao", "uct", "lrtdp", "direct")

#: default per-algorithm budget grids for profile sweeps
DEFAULT_BUDGETS = {
    "uct": (10, 50, 100, 500, 1000, 5000, 10000, 50000),
    "aot": (10, 50, 100, 500, 1000, 5000, 10000),
    "ao": (10, 50, 100, 500, 1000, 5000, 10000),
    "lrtdp": (10, 50, 100, 500, 1000, 5000, 10000),
    "direct": (1,),
}


@dataclass
class PlannerSpec:
    """Declarative planner choice, resolved against a model context."""

    algo: str = "aot"
    budget: int | None = None
    time_ms: float | None = None
    heuristic: str = "zero"              # zero | minmin | scaled:<factor>
    base_policy: str | None = None       # random | optimistic | greedy
    p: float = 0.5
    k: float = 0.1
    exploration: str = "adaptive"        # adaptive | fixed:<value>
    epsilon: float = 1e-4
    retain_table: bool = False
    engine: str = "auto"

    @property
    def label(self) -> str:
        if self.algo == "direct":
            return f"direct:{self.base_policy or 'random'}"
        if self.algo in ("aot", "ao"):
            leaf = f"rollout:{self.base_policy}" if self.base_policy else self.heuristic
            return f"{self.algo}:{leaf}"
        if self.algo == "uct":
            return f"uct:{self.base_policy or 'random'}"
        return f"lrtdp:{self.heuristic}"


def resolve_heuristic(context: PlanContext, name: str) -> Heuristic:
    if name == "zero":
        return ZeroHeuristic()
    if name == "minmin":
        return MinMinHeuristic(context.cached)
    if name.startswith("scaled:"):
        return ScaledHeuristic(MinMinHeuristic(context.cached), float(name.split(":", 1)[1]))
    raise ValueError(f"unknown heuristic {name!r}")


def resolve_policy(context: PlanContext, name: str, heuristic: str = "zero") -> BasePolicy:
    if name == "random":
        return RandomPolicy()
    if name == "greedy":
        return GreedyPolicy(resolve_heuristic(context, heuristic))
    if name == "optimistic":
        base = context.cached.base
        if not isinstance(base, ctp_domain.CtpModel):
            raise ValueError("the optimistic base policy is specific to road-navigation models")
        return ctp_domain.optimistic_policy(base)
    raise ValueError(f"unknown base policy {name!r}")


def build_planner(context: PlanContext, spec: PlannerSpec) -> Callable[[State, int, int], PlanResult]:
    """Compile a spec into ``fn(state, horizon, seed) -> PlanResult``."""
    if spec.algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {spec.algo!r}")
    cached = context.cached

    if spec.algo == "direct":
        policy = resolve_policy(context, spec.base_policy or "random", spec.heuristic)

        def run_direct(state, horizon, seed):
            rng = SplitMix64(seed)
            j = policy.choose_index(cached, state, rng)
            actions = cached.entry(state)[0]
            return PlanResult(action=actions[j], value=math.nan)

        return run_direct

    if spec.algo in ("aot", "ao"):
        if spec.base_policy:
            source = RolloutSource(resolve_policy(context, spec.base_policy, spec.heuristic))
        else:
            source = DeterministicSource(resolve_heuristic(context, spec.heuristic))
        p = 0.0 if spec.algo == "ao" else spec.p
        cfg = AotConfig(p=p, budget=spec.budget, time_ms=spec.time_ms,
                        batch_fraction=spec.k, heuristic=source, engine=spec.engine)

        def run_aot(state, horizon, seed):
            return aot_plan(context, state, horizon, replace(cfg, seed=seed))

        return run_aot

    if spec.algo == "uct":
        policy = resolve_policy(context, spec.base_policy or "random", spec.heuristic)
        if spec.exploration == "adaptive":
            exploration: str | float = "adaptive"
        elif spec.exploration.startswith("fixed:"):
            exploration = float(spec.exploration.split(":", 1)[1])
        else:
            exploration = float(spec.exploration)
        cfg_uct = UctConfig(budget=spec.budget or 1000, time_ms=spec.time_ms,
                            exploration=exploration, base_policy=policy, engine=spec.engine)

        def run_uct(state, horizon, seed):
            return uct_plan(context, state, horizon, replace(cfg_uct, seed=seed))

        return run_uct

    heuristic = resolve_heuristic(context, spec.heuristic)
    cfg_lrtdp = LrtdpConfig(epsilon=spec.epsilon, budget=spec.budget,
                            time_ms=spec.time_ms, heuristic=heuristic, engine=spec.engine)
    table = LrtdpState() if spec.retain_table else None

    def run_lrtdp(state, horizon, seed):
        shared = table if spec.retain_table else None
        return lrtdp_plan(context, state, horizon, replace(cfg_lrtdp, seed=seed), table=shared)

    return run_lrtdp


@dataclass
class EpisodeConfig:
    episodes: int = 1000
    max_steps: int = 100
    horizon: int | None = None        # None: the model's default
    master_seed: int = 0
    solvable_only: bool = True        # resample weathers until solvable
    record_trace: bool = False


@dataclass
class EpisodeResult:
    cost: float
    steps: int
    reached_goal: bool
    cap_hit: bool
    planner_failed: bool = False
    decision_seconds: float = 0.0
    decisions: int = 0
    trace: list[tuple[int, int, str, int, float]] | None = None


class _GenericEnv:
    """Ground-truth execution by sampling the model's own transitions."""

    def __init__(self, context: PlanContext):
        self.model = context.cached

    def reset(self, rng: SplitMix64) -> State:
        return pick_outcome([(s, p) for p, s in self.model.initial_outcomes()], rng)

    def step(self, state: State, action, rng: SplitMix64) -> tuple[State, float]:
        entry = self.model.entry(state)
        j = entry[0].index(action)
        return pick_outcome(entry[2][j], rng), entry[1][j]


class _WeatherEnv:
    """Execution against a sampled edge realization (road navigation)."""

    def __init__(self, context: PlanContext, solvable_only: bool):
        self.model = context.cached
        self.base: ctp_domain.CtpModel = context.cached.base
        self.solvable_only = solvable_only
        self.weather: tuple[bool, ...] | None = None

    def reset(self, rng: SplitMix64) -> State:
        instance = self.base.instance
        weather = ctp_domain.sample_weather(instance, rng)
        if self.solvable_only:
            while not ctp_domain.weather_solvable(instance, weather):
                weather = ctp_domain.sample_weather(instance, rng)
        self.weather = weather
        return ctp_domain.initial_belief(instance, weather)

    def step(self, state: State, action, rng: SplitMix64) -> tuple[State, float]:
        return ctp_domain.execute(self.base, state, action, self.weather)


def _make_env(context: PlanContext, cfg: EpisodeConfig):
    if isinstance(context.cached.base, ctp_domain.CtpModel):
        return _WeatherEnv(context, cfg.solvable_only)
    return _GenericEnv(context)


def run_episode(context: PlanContext, planner: Callable[[State, int, int], PlanResult],
                cfg: EpisodeConfig, episode_index: int) -> EpisodeResult:
    """One full plan-act loop, deterministic in (master seed, episode index)."""
    model = context.cached
    horizon = cfg.horizon if cfg.horizon is not None else model.default_horizon
    base_seed = derive_seed(cfg.master_seed, episode_index)
    env_rng = SplitMix64(derive_seed(base_seed, 0))
    decision_seed_base = derive_seed(base_seed, 1)
    env = _make_env(context, cfg)
    state = env.reset(env_rng)
    total = 0.0
    steps = 0
    plan_seconds = 0.0
    decisions = 0
    trace = [] if cfg.record_trace else None
    reached_goal = False
    cap_hit = False
    failed = False
    while steps < cfg.max_steps:
        kind = model.terminal_kind(state)
        if kind == GOAL:
            reached_goal = True
            break
        if kind == DEAD_END:
            total += model.dead_end_value
            break
        t0 = time.perf_counter()
        try:
            result = planner(state, horizon, derive_seed(decision_seed_base, steps))
        except Exception:
            failed = True
            total += model.dead_end_value
            break
        plan_seconds += time.perf_counter() - t0
        decisions += 1
        next_state, cost = env.step(state, result.action, env_rng)
        total += cost
        steps += 1
        if trace is not None:
            trace.append((steps, model.state_hash(state), str(result.action),
                          model.state_hash(next_state), cost))
        state = next_state
    else:
        cap_hit = True
        total += model.dead_end_value
    return EpisodeResult(cost=total, steps=steps, reached_goal=reached_goal,
                         cap_hit=cap_hit, planner_failed=failed,
                         decision_seconds=plan_seconds, decisions=decisions, trace=trace)


@dataclass
class BatchResult:
    episodes: list[EpisodeResult]

    @property
    def costs(self) -> list[float]:
        return [e.cost for e in self.episodes]

    @property
    def avg_cost(self) -> float:
        costs = self.costs
        return sum(costs) / len(costs)

    @property
    def std_err(self) -> float:
        costs = self.costs
        n = len(costs)
        if n < 2:
            return 0.0
        mean = sum(costs) / n
        var = sum((c - mean) ** 2 for c in costs) / (n - 1)
        return math.sqrt(var / n)

    @property
    def avg_time_per_action(self) -> float:
        decisions = sum(e.decisions for e in self.episodes)
        if decisions == 0:
            return 0.0
        return sum(e.decision_seconds for e in self.episodes) / decisions

    @property
    def cap_hits(self) -> int:
        return sum(1 for e in self.episodes if e.cap_hit or e.planner_failed)


def run_batch(context: PlanContext, planner, cfg: EpisodeConfig) -> BatchResult:
    return BatchResult([run_episode(context, planner, cfg, i) for i in range(cfg.episodes)])


@dataclass
class ProfileRow:
    planner: str
    instance: str
    budget_kind: str
    budget: float
    episodes: int
    avg_time_per_action_s: float
    avg_cost: float
    std_err: float
    cap_hits: int


def quality_profile(context: PlanContext, specs: Sequence[PlannerSpec],
                    cfg: EpisodeConfig,
                    budgets: dict[str, Sequence[int]] | None = None) -> list[ProfileRow]:
    """Sweep planners over budget grids; one row per (planner, budget) cell."""
    if not specs:
        raise ValueError("empty planner sweep")
    instance_name = getattr(context.cached.base, "name", "instance")
    rows = []
    for spec in specs:
        if spec.budget is not None:
            grid: Sequence[int] = (spec.budget,)
        elif budgets and spec.algo in budgets:
            grid = budgets[spec.algo]
        else:
            grid = DEFAULT_BUDGETS[spec.algo]
        for budget in grid:
            cell = replace(spec, budget=budget, time_ms=spec.time_ms)
            planner = build_planner(context, cell)
            batch = run_batch(context, planner, cfg)
            kind = "time_ms" if spec.time_ms is not None else "iterations"
            rows.append(ProfileRow(
                planner=spec.label,
                instance=instance_name,
                budget_kind=kind,
                budget=spec.time_ms if spec.time_ms is not None else budget,
                episodes=cfg.episodes,
                avg_time_per_action_s=batch.avg_time_per_action,
                avg_cost=batch.avg_cost,
                std_err=batch.std_err,
                cap_hits=batch.cap_hits,
            ))
    return rows


def emit_csv(rows: Sequence[ProfileRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.planner, r.instance, r.budget_kind, repr(r.budget), r.episodes,
                         repr(r.avg_time_per_action_s), repr(r.avg_cost), repr(r.std_err),
                         r.cap_hits])
    return out.getvalue()


def parse_csv(text: str) -> list[ProfileRow]:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected header {header!r}")
    rows = []
    for rec in reader:
        rows.append(ProfileRow(
            planner=rec[0], instance=rec[1], budget_kind=rec[2], budget=float(rec[3]),
            episodes=int(rec[4]), avg_time_per_action_s=float(rec[5]),
            avg_cost=float(rec[6]), std_err=float(rec[7]), cap_hits=int(rec[8]),
        ))
    return rows


def emit_trace(result: EpisodeResult) -> str:
    """Line-oriented episode trace: step,state_hash,action,outcome_state_hash,cost."""
    if result.trace is None:
        raise ValueError("episode was run without trace recording")
    return "\n".join(
        f"{step},{h1},{action},{h2},{cost!r}" for step, h1, action, h2, cost in result.trace
    ) + ("\n" if result.trace else "")
