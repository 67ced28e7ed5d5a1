"""Racetrack: grid driving with inertia and acceleration slip.

States are ``(x, y, vx, vy)``. An action is an acceleration pair from
{-1,0,1}^2, applied with probability ``1 - q_slip`` (otherwise the velocity
is kept), after which the car moves by its resulting velocity. A trajectory
that leaves the track resets the car to a uniformly random start cell with
zero velocity; crossing a finish cell ends the episode. Every step costs 1.
"""

from __future__ import annotations

from ..mdp import MdpModel, ModelError

GOAL_STATE = "finish"

ACCELERATIONS = tuple((ax, ay) for ax in (-1, 0, 1) for ay in (-1, 0, 1))

TRACK, WALL, START, FINISH = ".", "#", "s", "f"


class RacetrackInstance:
    def __init__(self, grid: tuple[str, ...], q_slip: float = 0.1, max_speed: int = 5,
                 name: str = "racetrack"):
        if not 0.0 <= q_slip < 1.0:
            raise ModelError("slip probability must lie in [0, 1)")
        if max_speed < 1:
            raise ModelError("max speed must be at least 1")
        if not grid or any(len(row) != len(grid[0]) for row in grid):
            raise ModelError("grid rows must be nonempty and equally long")
        bad = {c for row in grid for c in row} - {TRACK, WALL, START, FINISH}
        if bad:
            raise ModelError(f"unknown grid characters {sorted(bad)}")
        self.grid = grid
        self.q_slip = q_slip
        self.max_speed = max_speed
        self.name = name
        self.width = len(grid[0])
        self.height = len(grid)
        self.starts = tuple(
            (x, y) for y in range(self.height) for x in range(self.width)
            if grid[y][x] == START
        )
        self.finishes = frozenset(
            (x, y) for y in range(self.height) for x in range(self.width)
            if grid[y][x] == FINISH
        )
        if not self.starts:
            raise ModelError("no start cells")
        if not self.finishes:
            raise ModelError("no finish cells")
        if not self._finish_reachable():
            raise ModelError("finish not reachable from every start")

    def cell(self, x: int, y: int) -> str:
        if 0 <= x < self.width and 0 <= y < self.height:
            return self.grid[y][x]
        return WALL

    def _finish_reachable(self) -> bool:
        # unit moves are always realizable, so 8-neighbor reachability over
        # non-wall cells decides whether the track can be driven at all
        for start in self.starts:
            seen = {start}
            stack = [start]
            found = False
            while stack:
                x, y = stack.pop()
                if (x, y) in self.finishes:
                    found = True
                    break
                for dx in (-1, 0, 1):
                    for dy in (-1, 0, 1):
                        nx, ny = x + dx, y + dy
                        if (nx, ny) not in seen and self.cell(nx, ny) != WALL:
                            seen.add((nx, ny))
                            stack.append((nx, ny))
            if not found:
                return False
        return True


def _interp(c: int, delta: int, i: int, steps: int) -> int:
    """Integer-exact rounding of ``c + i * delta / steps`` to nearest."""
    num = 2 * i * delta + steps
    return c + (num // (2 * steps) if num >= 0 else -((-num + 2 * steps - 1) // (2 * steps)))


class RacetrackModel(MdpModel):
    def __init__(self, instance: RacetrackInstance):
        self.instance = instance
        self.gamma = 1.0
        self.default_horizon = 50
        # used only for scoring step-capped episodes; no dead ends exist
        self.dead_end_value = 4.0 * (instance.width + instance.height)
        self.name = instance.name

    def initial_outcomes(self):
        starts = self.instance.starts
        p = 1.0 / len(starts)
        return tuple((p, (x, y, 0, 0)) for x, y in starts)

    def is_goal(self, state) -> bool:
        return state == GOAL_STATE

    def actions(self, state):
        if state == GOAL_STATE:
            return ()
        _, _, vx, vy = state
        limit = self.instance.max_speed
        return tuple(
            (ax, ay) for ax, ay in ACCELERATIONS
            if abs(vx + ax) <= limit and abs(vy + ay) <= limit
        )

    def cost(self, state, action) -> float:
        return 1.0

    def transitions(self, state, action):
        x, y, vx, vy = state
        ax, ay = action
        q = self.instance.q_slip
        outcomes: dict = {}

        def add(branch_p: float, wx: int, wy: int) -> None:
            for s2, p in self._move(x, y, wx, wy):
                outcomes[s2] = outcomes.get(s2, 0.0) + branch_p * p

        add(1.0 - q, vx + ax, vy + ay)
        if q > 0.0:
            add(q, vx, vy)
        return tuple(outcomes.items())

    def _move(self, x: int, y: int, vx: int, vy: int):
        """Outcomes of moving by (vx, vy): land, finish, or crash-and-reset."""
        instance = self.instance
        if vx == 0 and vy == 0:
            return (((x, y, 0, 0), 1.0),)
        steps = max(abs(vx), abs(vy))
        for i in range(1, steps + 1):
            cx = _interp(x, vx, i, steps)
            cy = _interp(y, vy, i, steps)
            if (cx, cy) in instance.finishes:
                return ((GOAL_STATE, 1.0),)
            if instance.cell(cx, cy) == WALL:
                p = 1.0 / len(instance.starts)
                return tuple(((sx, sy, 0, 0), p) for sx, sy in instance.starts)
        return (((x + vx, y + vy, vx, vy), 1.0),)

    def enumerate_states(self):
        instance = self.instance
        limit = instance.max_speed
        for y in range(instance.height):
            for x in range(instance.width):
                if instance.cell(x, y) in (WALL, FINISH):
                    continue
                for vx in range(-limit, limit + 1):
                    for vy in range(-limit, limit + 1):
                        yield (x, y, vx, vy)
        yield GOAL_STATE


# --- file format ------------------------------------------------------------

def format_instance(instance: RacetrackInstance) -> str:
    header = f"racetrack {instance.q_slip!r} {instance.max_speed}"
    return "\n".join([header, *instance.grid]) + "\n"


def parse_instance(text: str, name: str = "racetrack") -> RacetrackInstance:
    # no comment syntax here: '#' is the wall character in grid rows
    lines = [l.rstrip() for l in text.splitlines() if l.strip()]
    if not lines or lines[0].split()[0] != "racetrack":
        raise ModelError("not a racetrack instance file")
    header = lines[0].split()
    q_slip = float(header[1]) if len(header) > 1 else 0.1
    max_speed = int(header[2]) if len(header) > 2 else 5
    grid = tuple(lines[1:])
    if not grid:
        raise ModelError("missing grid")
    return RacetrackInstance(grid, q_slip=q_slip, max_speed=max_speed, name=name)
