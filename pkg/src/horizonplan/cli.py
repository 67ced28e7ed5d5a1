"""Command-line harness: one-shot decisions, episodes, quality profiles,
instance generation, and exact oracle values.

Exit codes: 0 on success, 2 on bad arguments, 1 on runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ._engine import PlanContext
from .bench import (
    DEFAULT_BUDGETS,
    EpisodeConfig,
    PlannerSpec,
    build_planner,
    emit_csv,
    emit_trace,
    quality_profile,
    run_episode,
)
from .domains import ctp as ctp_domain
from .domains import load_instance
from .oracle import expected_initial_value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="horizonplan",
        description="Anytime action selection for finite-horizon MDPs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def planner_flags(p: argparse.ArgumentParser, repeat_algo: bool = False) -> None:
        if repeat_algo:
            p.add_argument("--algo", action="append", choices=["aot", "ao", "uct", "lrtdp"],
                           help="algorithm (repeatable)")
        else:
            p.add_argument("--algo", choices=["aot", "ao", "uct", "lrtdp"], default="aot")
        p.add_argument("--heuristic", default="zero",
                       help="zero | minmin | scaled:<factor> (leaf values / greedy policy)")
        p.add_argument("--base-policy", choices=["random", "optimistic", "greedy"],
                       default=None,
                       help="rollout base policy; for aot, selects sampled leaf values")
        p.add_argument("--budget", type=int, action="append", default=None,
                       help="per-decision iteration budget (repeatable for profile grids)")
        p.add_argument("--time-ms", type=float, default=None,
                       help="per-decision wall-clock budget in milliseconds")
        p.add_argument("--p", type=float, default=0.5,
                       help="probability of expanding outside the best partial graph")
        p.add_argument("--k", type=float, default=0.1,
                       help="selection batch as a fraction of the iteration budget")
        p.add_argument("--C", dest="exploration", default="adaptive",
                       help="UCT exploration: adaptive | fixed:<value>")
        p.add_argument("--epsilon", type=float, default=1e-4,
                       help="residual tolerance for trial-based planning")
        p.add_argument("--engine", choices=["auto", "pure", "compiled"], default="auto")

    def common_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--horizon", type=int, default=None)

    p_solve = sub.add_parser("solve", help="plan one decision and print the root Q table")
    p_solve.add_argument("instance", type=Path)
    planner_flags(p_solve)
    common_flags(p_solve)

    p_episode = sub.add_parser("episode", help="run plan-act episodes and print costs")
    p_episode.add_argument("instance", type=Path)
    planner_flags(p_episode)
    common_flags(p_episode)
    p_episode.add_argument("--episodes", type=int, default=1)
    p_episode.add_argument("--max-steps", type=int, default=100)
    p_episode.add_argument("--include-unsolvable", action="store_true",
                           help="keep unsolvable sampled weathers instead of resampling")
    p_episode.add_argument("--trace", type=Path, default=None,
                           help="write per-step trace lines to this file")

    p_profile = sub.add_parser("profile", help="sweep budgets x planners into CSV rows")
    p_profile.add_argument("instance", type=Path)
    planner_flags(p_profile, repeat_algo=True)
    common_flags(p_profile)
    p_profile.add_argument("--episodes", type=int, default=1000)
    p_profile.add_argument("--max-steps", type=int, default=100)
    p_profile.add_argument("--include-unsolvable", action="store_true")
    p_profile.add_argument("--out", type=Path, default=None, help="CSV path (default stdout)")

    p_gen = sub.add_parser("gen-ctp", help="generate a random road-navigation instance")
    p_gen.add_argument("--nodes", type=int, required=True)
    p_gen.add_argument("--density", type=float, default=1.5)
    p_gen.add_argument("--prior-lo", type=float, default=0.1)
    p_gen.add_argument("--prior-hi", type=float, default=0.5)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", type=Path, default=None)

    p_oracle = sub.add_parser("oracle", help="exact optimal expected cost of an instance")
    p_oracle.add_argument("instance", type=Path)
    p_oracle.add_argument("--horizon", type=int, default=None)

    return parser


def _validate(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    if getattr(args, "p", None) is not None and not 0.0 <= args.p <= 1.0:
        parser.error(f"--p must lie in [0, 1], got {args.p}")
    if getattr(args, "k", None) is not None and not 0.0 < args.k <= 1.0:
        parser.error(f"--k must lie in (0, 1], got {args.k}")
    if getattr(args, "epsilon", None) is not None and args.epsilon <= 0:
        parser.error("--epsilon must be positive")
    exploration = getattr(args, "exploration", None)
    if exploration is not None and exploration != "adaptive":
        if not exploration.startswith("fixed:"):
            parser.error("--C must be adaptive or fixed:<value>")
        try:
            value = float(exploration.split(":", 1)[1])
        except ValueError:
            parser.error("--C fixed value must be numeric")
        else:
            if value < 0:
                parser.error("--C fixed value must be nonnegative")
    budgets = getattr(args, "budget", None)
    if budgets:
        for b in budgets:
            if b < 1:
                parser.error("--budget must be at least 1")
    if getattr(args, "time_ms", None) is not None and args.time_ms < 0:
        parser.error("--time-ms must be nonnegative")
    prior_lo = getattr(args, "prior_lo", None)
    if prior_lo is not None:
        if not 0.0 <= args.prior_lo <= args.prior_hi < 1.0:
            parser.error("priors must satisfy 0 <= lo <= hi < 1")
        if args.nodes < 2:
            parser.error("--nodes must be at least 2")


def _spec_from_args(args: argparse.Namespace, algo: str, budget: int | None) -> PlannerSpec:
    return PlannerSpec(
        algo=algo,
        budget=budget,
        time_ms=args.time_ms,
        heuristic=args.heuristic,
        base_policy=args.base_policy,
        p=args.p,
        k=args.k,
        exploration=args.exploration,
        epsilon=args.epsilon,
        engine=args.engine,
    )


def _initial_state(context: PlanContext, seed: int, solvable_only: bool = True):
    from .mdp import pick_outcome
    from .rng import SplitMix64, derive_seed

    base = context.cached.base
    rng = SplitMix64(derive_seed(seed, 0))
    if isinstance(base, ctp_domain.CtpModel):
        weather = ctp_domain.sample_weather(base.instance, rng)
        if solvable_only:
            while not ctp_domain.weather_solvable(base.instance, weather):
                weather = ctp_domain.sample_weather(base.instance, rng)
        return ctp_domain.initial_belief(base.instance, weather)
    return pick_outcome([(s, p) for p, s in context.cached.initial_outcomes()], rng)


def _cmd_solve(args: argparse.Namespace) -> int:
    context = PlanContext(load_instance(args.instance))
    horizon = args.horizon or context.cached.default_horizon
    budget = args.budget[0] if args.budget else None
    if args.algo == "uct" and budget is None:
        budget = 1000
    spec = _spec_from_args(args, args.algo, budget)
    planner = build_planner(context, spec)
    state = _initial_state(context, args.seed)
    result = planner(state, horizon, args.seed)
    print(f"state: {state!r}")
    print(f"action: {result.action}")
    print(f"value: {result.value!r}")
    for action, q in sorted(result.root_q.items(), key=lambda kv: str(kv[0])):
        print(f"q: {action} {q!r}")
    return 0


def _cmd_episode(args: argparse.Namespace) -> int:
    context = PlanContext(load_instance(args.instance))
    budget = args.budget[0] if args.budget else None
    if args.algo == "uct" and budget is None:
        budget = 1000
    spec = _spec_from_args(args, args.algo, budget)
    planner = build_planner(context, spec)
    cfg = EpisodeConfig(
        episodes=args.episodes, max_steps=args.max_steps, horizon=args.horizon,
        master_seed=args.seed, solvable_only=not args.include_unsolvable,
        record_trace=args.trace is not None,
    )
    trace_lines = []
    total = 0.0
    for i in range(cfg.episodes):
        episode = run_episode(context, planner, cfg, i)
        total += episode.cost
        status = "goal" if episode.reached_goal else ("cap" if episode.cap_hit else "dead-end")
        print(f"episode {i}: cost={episode.cost!r} steps={episode.steps} {status}")
        if args.trace is not None:
            trace_lines.append(f"# episode {i}")
            trace_lines.append(emit_trace(episode).rstrip("\n"))
    print(f"avg_cost: {total / cfg.episodes!r}")
    if args.trace is not None:
        args.trace.write_text("\n".join(trace_lines) + "\n")
    return 0


def _cmd_profile(args: argparse.Namespace) -> int:
    context = PlanContext(load_instance(args.instance))
    algos = args.algo or ["aot"]
    cfg = EpisodeConfig(
        episodes=args.episodes, max_steps=args.max_steps, horizon=args.horizon,
        master_seed=args.seed, solvable_only=not args.include_unsolvable,
    )
    specs = [_spec_from_args(args, algo, None) for algo in algos]
    budgets = {algo: args.budget for algo in algos} if args.budget else None
    rows = quality_profile(context, specs, cfg, budgets=budgets)
    text = emit_csv(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return 0


def _cmd_gen_ctp(args: argparse.Namespace) -> int:
    instance = ctp_domain.generate_instance(
        args.nodes, density=args.density,
        prior_range=(args.prior_lo, args.prior_hi), seed=args.seed,
    )
    text = ctp_domain.format_instance(instance)
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return 0


def _cmd_oracle(args: argparse.Namespace) -> int:
    model = load_instance(args.instance)
    horizon = args.horizon or model.default_horizon
    print(expected_initial_value(model, horizon))
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "episode": _cmd_episode,
    "profile": _cmd_profile,
    "gen-ctp": _cmd_gen_ctp,
    "oracle": _cmd_oracle,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # runtime failure -> exit 1 with a message
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
