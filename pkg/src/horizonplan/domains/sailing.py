"""Grid sailing with Markov wind.

States are ``(x, y, wind_direction)`` over an 8-direction compass. A move
picks a heading; sailing straight into the wind is forbidden, and the cost of
a tack grows with the relative angle between heading and wind (times sqrt(2)
on diagonals). The wind evolves by a row-stochastic chain independent of the
action. The goal cell is absorbing and cost-free.
"""

from __future__ import annotations

import math

from ..mdp import MdpModel, ModelError

#: compass order: E, NE, N, NW, W, SW, S, SE (index steps of 45 degrees)
DIRECTIONS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
SQRT2 = math.sqrt(2.0)

DEFAULT_TACK_COSTS = (1.0, 2.0, 3.0, 4.0)


def default_wind_matrix() -> tuple[tuple[float, ...], ...]:
    """Stay with probability 0.4, rotate 45 degrees either way with 0.3."""
    rows = []
    for w in range(8):
        row = [0.0] * 8
        row[w] = 0.4
        row[(w + 1) % 8] = 0.3
        row[(w - 1) % 8] = 0.3
        rows.append(tuple(row))
    return tuple(rows)


class SailingInstance:
    def __init__(self, width: int, height: int, start: tuple[int, int],
                 goal: tuple[int, int], gamma: float = 0.95,
                 wind_matrix: tuple[tuple[float, ...], ...] | None = None,
                 tack_costs: tuple[float, float, float, float] = DEFAULT_TACK_COSTS,
                 start_wind: int = 0, name: str = "sailing"):
        if width < 1 or height < 1:
            raise ModelError("grid must be at least 1x1")
        for cell in (start, goal):
            if not (0 <= cell[0] < width and 0 <= cell[1] < height):
                raise ModelError(f"cell {cell} outside the grid")
        wind_matrix = wind_matrix or default_wind_matrix()
        if len(wind_matrix) != 8:
            raise ModelError("wind matrix needs 8 rows")
        for row in wind_matrix:
            if len(row) != 8 or any(p < 0 for p in row) or abs(sum(row) - 1.0) > 1e-9:
                raise ModelError(f"wind row {row} is not a distribution")
        if any(c <= 0 for c in tack_costs):
            raise ModelError("tack costs must be positive")
        if not 0 <= start_wind < 8:
            raise ModelError("start wind out of range")
        self.width = width
        self.height = height
        self.start = start
        self.goal = goal
        self.gamma = gamma
        self.wind_matrix = wind_matrix
        self.tack_costs = tuple(tack_costs)
        self.start_wind = start_wind
        self.name = name


class SailingModel(MdpModel):
    """Headings are action values 0..7 in compass order."""

    def __init__(self, instance: SailingInstance):
        self.instance = instance
        self.gamma = instance.gamma
        self.default_horizon = 50
        # no dead ends exist; the penalty only scores step-capped episodes
        self.dead_end_value = 2.0 * max(instance.tack_costs) * SQRT2 * (
            instance.width + instance.height)
        self.name = instance.name

    @property
    def state_count(self) -> int:
        return self.instance.width * self.instance.height * 8

    def initial_outcomes(self):
        x, y = self.instance.start
        return ((1.0, (x, y, self.instance.start_wind)),)

    def is_goal(self, state) -> bool:
        return (state[0], state[1]) == self.instance.goal

    def actions(self, state):
        if self.is_goal(state):
            return ()
        x, y, wind = state
        instance = self.instance
        headings = []
        for j, (dx, dy) in enumerate(DIRECTIONS):
            if _angle_steps(j, wind) == 4:
                continue  # straight into the wind
            if 0 <= x + dx < instance.width and 0 <= y + dy < instance.height:
                headings.append(j)
        return tuple(headings)

    def cost(self, state, heading: int) -> float:
        wind = state[2]
        steps = _angle_steps(heading, wind)
        dx, dy = DIRECTIONS[heading]
        length = SQRT2 if dx != 0 and dy != 0 else 1.0
        return self.instance.tack_costs[steps] * length

    def transitions(self, state, heading: int):
        x, y, wind = state
        dx, dy = DIRECTIONS[heading]
        row = self.instance.wind_matrix[wind]
        return tuple(((x + dx, y + dy, w2), p) for w2, p in enumerate(row) if p > 0.0)

    def enumerate_states(self):
        for x in range(self.instance.width):
            for y in range(self.instance.height):
                for w in range(8):
                    yield (x, y, w)


def _angle_steps(heading: int, wind: int) -> int:
    diff = abs(heading - wind) % 8
    return min(diff, 8 - diff)


# --- file format ------------------------------------------------------------

def format_instance(instance: SailingInstance) -> str:
    lines = [
        "sailing",
        f"width {instance.width}",
        f"height {instance.height}",
        f"start {instance.start[0]} {instance.start[1]}",
        f"goal {instance.goal[0]} {instance.goal[1]}",
        f"gamma {instance.gamma!r}",
        f"start_wind {instance.start_wind}",
        "tack_costs " + " ".join(repr(c) for c in instance.tack_costs),
    ]
    for i, row in enumerate(instance.wind_matrix):
        lines.append(f"wind_row {i} " + " ".join(repr(p) for p in row))
    return "\n".join(lines) + "\n"


def parse_instance(text: str, name: str = "sailing") -> SailingInstance:
    fields: dict[str, list[str]] = {}
    wind_rows: dict[int, tuple[float, ...]] = {}
    lines = [l.strip() for l in text.splitlines() if l.strip() and not l.strip().startswith("#")]
    if not lines or lines[0].split()[0] != "sailing":
        raise ModelError("not a sailing instance file")
    for line in lines[1:]:
        parts = line.split()
        if parts[0] == "wind_row":
            wind_rows[int(parts[1])] = tuple(float(p) for p in parts[2:])
        else:
            fields[parts[0]] = parts[1:]

    def need(key: str) -> list[str]:
        if key not in fields:
            raise ModelError(f"missing field {key!r}")
        return fields[key]

    wind_matrix = None
    if wind_rows:
        if sorted(wind_rows) != list(range(8)):
            raise ModelError("wind matrix needs rows 0..7")
        wind_matrix = tuple(wind_rows[i] for i in range(8))
    return SailingInstance(
        width=int(need("width")[0]),
        height=int(need("height")[0]),
        start=(int(need("start")[0]), int(need("start")[1])),
        goal=(int(need("goal")[0]), int(need("goal")[1])),
        gamma=float(fields.get("gamma", ["0.95"])[0]),
        wind_matrix=wind_matrix,
        tack_costs=tuple(float(c) for c in fields.get("tack_costs", list(map(str, DEFAULT_TACK_COSTS)))),
        start_wind=int(fields.get("start_wind", ["0"])[0]),
        name=name,
    )
