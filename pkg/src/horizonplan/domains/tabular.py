"""Text format for small explicit MDPs (used by the CLI and tests).

Example::

    tabular
    gamma 1.0
    horizon 2
    initial x0
    goal goal
    action x0 A 1.0 goal 1.0
    action x0 B 0.5 goal 0.5 x0 0.5

``action <state> <name> <cost> <succ p>...`` lines declare the dynamics;
states mentioned only as successors of nothing but goals/dead-ends need a
``goal <state>`` or ``deadend <state>`` line.
"""

from __future__ import annotations

from ..mdp import ModelError, TabularMdp


def parse_model(text: str, name: str = "tabular") -> TabularMdp:
    gamma = 1.0
    horizon = 50
    dead_end_value = 0.0
    initial = None
    goals: set[str] = set()
    dead_ends: set[str] = set()
    spec: dict[str, list] = {}
    lines = [l.strip() for l in text.splitlines() if l.strip() and not l.strip().startswith("#")]
    if not lines or lines[0].split()[0] != "tabular":
        raise ModelError("not a tabular model file")
    for line in lines[1:]:
        parts = line.split()
        key = parts[0]
        if key == "gamma":
            gamma = float(parts[1])
        elif key == "horizon":
            horizon = int(parts[1])
        elif key == "deadend_value":
            dead_end_value = float(parts[1])
        elif key == "initial":
            initial = parts[1]
        elif key == "goal":
            goals.add(parts[1])
        elif key == "deadend":
            dead_ends.add(parts[1])
        elif key == "action":
            if len(parts) < 6 or len(parts) % 2 != 0:
                raise ModelError(f"bad action line {line!r}")
            state, action_name = parts[1], parts[2]
            cost = float(parts[3])
            succ = [(parts[i], float(parts[i + 1])) for i in range(4, len(parts), 2)]
            spec.setdefault(state, []).append((action_name, cost, succ))
        else:
            raise ModelError(f"unknown field {key!r}")
    if initial is None:
        raise ModelError("missing initial state")
    for terminal in goals | dead_ends:
        spec.setdefault(terminal, [])
    for entries in list(spec.values()):
        for _, _, succ in entries:
            for s2, _ in succ:
                spec.setdefault(s2, [])
    return TabularMdp(
        spec, initial=initial, goals=goals, dead_ends=dead_ends, gamma=gamma,
        dead_end_value=dead_end_value, default_horizon=horizon, name=name,
    )


def format_model(model: TabularMdp) -> str:
    lines = ["tabular", f"gamma {model.gamma!r}", f"horizon {model.default_horizon}",
             f"deadend_value {model.dead_end_value!r}",
             f"initial {model.initial_outcomes()[0][1]}"]
    for state in model.enumerate_states():
        if model.is_goal(state):
            lines.append(f"goal {state}")
        elif model.is_dead_end(state):
            lines.append(f"deadend {state}")
    for state in model.enumerate_states():
        for action in model.actions(state):
            cost = model.cost(state, action)
            succ = " ".join(f"{s2} {p!r}" for s2, p in model.transitions(state, action))
            lines.append(f"action {state} {action} {cost!r} {succ}")
    return "\n".join(lines) + "\n"
