"""Four-rooms style grids: layout construction, taboo marking, text format.

Cells are (x, y) with y increasing downward, matching the row order of the
text format. Moves into walls or off the grid are no-ops that still pay the
step penalty. Rewards are granted on taking the action; the goal bonus is
paid on the transition entering the goal, and the goal itself is absorbing
with zero reward, so V(goal) = 0.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
import math

import numpy as np

from .mdp import Mdp, BasePolicy

ACTIONS = ("up", "down", "left", "right")
DELTAS = ((0, -1), (0, 1), (-1, 0), (1, 0))
N_ACTIONS = len(ACTIONS)


class GridLayoutError(ValueError):
    """Layout is malformed or the goal cannot be reached safely."""


class TabooInfeasibleError(RuntimeError):
    """No taboo draw of the requested size leaves a safe path."""


@dataclass(frozen=True)
class GridWorld:
    width: int
    height: int
    walls: frozenset
    start: tuple
    goal: tuple
    taboo: frozenset = frozenset()
    goal_reward: float = 10.0
    step_penalty: float = -0.1  # additive reward per step, usually negative
    max_steps: int = 300

    def __post_init__(self):
        object.__setattr__(self, "walls", frozenset(self.walls))
        object.__setattr__(self, "taboo", frozenset(self.taboo))
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "goal", tuple(self.goal))
        if self.width < 2 or self.height < 2:
            raise GridLayoutError("grid must be at least 2x2")
        if self.max_steps < 1:
            raise GridLayoutError("max_steps must be positive")
        for cell in (self.start, self.goal, *self.walls, *self.taboo):
            if not self.in_bounds(cell):
                raise GridLayoutError(f"cell {cell} outside the grid")
        if self.start == self.goal:
            raise GridLayoutError("start and goal coincide")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if cell in self.walls:
                raise GridLayoutError(f"{name} {cell} is a wall")
            if cell in self.taboo:
                raise GridLayoutError(f"{name} {cell} is taboo")
        if self.walls & self.taboo:
            raise GridLayoutError("wall and taboo sets overlap")
        if self.bfs_path() is None:
            raise GridLayoutError("no safe path from start to goal")

    def in_bounds(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def passable(self, cell) -> bool:
        return self.in_bounds(cell) and cell not in self.walls

    def cells(self):
        """Non-wall cells in row-major order; this fixes the state indexing."""
        return [(x, y) for y in range(self.height) for x in range(self.width)
                if (x, y) not in self.walls]

    def cell_index(self):
        return {c: i for i, c in enumerate(self.cells())}

    def next_cell(self, cell, action: int):
        dx, dy = DELTAS[action]
        cand = (cell[0] + dx, cell[1] + dy)
        return cand if self.passable(cand) else cell

    def bfs_path(self, avoid_taboo: bool = True):
        """Shortest start-to-goal path avoiding walls (and taboo), else None."""
        blocked = self.walls | self.taboo if avoid_taboo else self.walls
        if self.start in blocked or self.goal in blocked:
            return None
        prev = {self.start: None}
        queue = deque([self.start])
        while queue:
            cur = queue.popleft()
            if cur == self.goal:
                path = []
                while cur is not None:
                    path.append(cur)
                    cur = prev[cur]
                return path[::-1]
            for dx, dy in DELTAS:
                nxt = (cur[0] + dx, cur[1] + dy)
                if self.in_bounds(nxt) and nxt not in blocked and nxt not in prev:
                    prev[nxt] = cur
                    queue.append(nxt)
        return None

    def to_mdp(self, gamma: float = 0.99) -> Mdp:
        cells = self.cells()
        index = {c: i for i, c in enumerate(cells)}
        n = len(cells)
        kernel = np.zeros((n, N_ACTIONS, n))
        reward = np.zeros((n, N_ACTIONS))
        g = index[self.goal]
        for i, c in enumerate(cells):
            if i == g:
                kernel[i, :, i] = 1.0
                continue
            for a in range(N_ACTIONS):
                j = index[self.next_cell(c, a)]
                kernel[i, a, j] = 1.0
                reward[i, a] = self.step_penalty + (self.goal_reward if j == g else 0.0)
        return Mdp(kernel=kernel, reward=reward, gamma=gamma,
                   start=index[self.start], terminals=frozenset({g}))

    def unsafe_actions(self) -> np.ndarray:
        """(S, A) mask of actions whose destination is a taboo cell."""
        cells = self.cells()
        out = np.zeros((len(cells), N_ACTIONS), dtype=bool)
        for i, c in enumerate(cells):
            for a in range(N_ACTIONS):
                out[i, a] = self.next_cell(c, a) in self.taboo
        return out

    def with_taboo(self, taboo) -> "GridWorld":
        return replace(self, taboo=frozenset(taboo))

    def to_text(self) -> str:
        head = (f"{self.width} {self.height} {float(self.goal_reward)!r} "
                f"{float(self.step_penalty)!r} {self.max_steps}")
        rows = []
        for y in range(self.height):
            row = []
            for x in range(self.width):
                c = (x, y)
                if c == self.start:
                    row.append("S")
                elif c == self.goal:
                    row.append("G")
                elif c in self.walls:
                    row.append("#")
                elif c in self.taboo:
                    row.append("x")
                else:
                    row.append(".")
            rows.append("".join(row))
        return "\n".join([head, *rows]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GridWorld":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise GridLayoutError("empty grid text")
        parts = lines[0].split()
        if len(parts) != 5:
            raise GridLayoutError("header must be: width height goal_reward step_penalty max_steps")
        width, height = int(parts[0]), int(parts[1])
        goal_reward, step_penalty = float(parts[2]), float(parts[3])
        max_steps = int(parts[4])
        rows = lines[1:]
        if len(rows) != height or any(len(r) != width for r in rows):
            raise GridLayoutError("grid body does not match the header dimensions")
        walls, taboo = set(), set()
        start = goal = None
        for y, row in enumerate(rows):
            for x, ch in enumerate(row):
                if ch == "#":
                    walls.add((x, y))
                elif ch == "x":
                    taboo.add((x, y))
                elif ch == "S":
                    start = (x, y)
                elif ch == "G":
                    goal = (x, y)
                elif ch != ".":
                    raise GridLayoutError(f"unknown cell character {ch!r} at {(x, y)}")
        if start is None or goal is None:
            raise GridLayoutError("grid must mark exactly one S and one G")
        return cls(width=width, height=height, walls=frozenset(walls),
                   start=start, goal=goal, taboo=frozenset(taboo),
                   goal_reward=goal_reward, step_penalty=step_penalty,
                   max_steps=max_steps)


def build_four_rooms(width: int, height: int, doorways=None, *,
                     goal_reward: float = 10.0, step_penalty: float = -0.1,
                     max_steps: int = 300) -> GridWorld:
    """Two internal walls split the grid into four rooms joined by doorways.

    The vertical wall sits at x = width//2, the horizontal at y = height//2.
    Default doorways pierce the midpoint of each of the four wall segments.
    Start is (0, 0), goal the opposite corner.
    """
    if width < 5 or height < 5:
        raise GridLayoutError("four-rooms layout needs at least a 5x5 grid")
    wx, wy = width // 2, height // 2
    wall_cells = {(wx, y) for y in range(height)} | {(x, wy) for x in range(width)}
    if doorways is None:
        doorways = [
            (wx, (wy - 1) // 2),
            (wx, (wy + 1 + height - 1) // 2),
            ((wx - 1) // 2, wy),
            ((wx + 1 + width - 1) // 2, wy),
        ]
    doorways = [tuple(d) for d in doorways]
    for d in doorways:
        if d not in wall_cells:
            raise GridLayoutError(f"doorway {d} is not on a wall line")
    walls = frozenset(wall_cells - set(doorways))
    try:
        return GridWorld(width=width, height=height, walls=walls,
                         start=(0, 0), goal=(width - 1, height - 1),
                         goal_reward=goal_reward, step_penalty=step_penalty,
                         max_steps=max_steps)
    except GridLayoutError as err:
        raise GridLayoutError(f"invalid four-rooms layout: {err}") from err


def sample_taboo(grid: GridWorld, fraction: float, seed, max_tries: int = 200) -> GridWorld:
    """Mark floor(fraction * |non-wall|) random non-wall cells as taboo.

    Start and goal are never taboo. Draws are rejected until a safe
    (wall- and taboo-avoiding) start-to-goal path survives.
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"fraction must lie in [0, 1), got {fraction}")
    cells = grid.cells()
    k = math.floor(fraction * len(cells))
    candidates = [c for c in cells if c not in (grid.start, grid.goal)]
    if k > len(candidates):
        raise TabooInfeasibleError(f"cannot place {k} taboo cells among {len(candidates)} candidates")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        pick = rng.choice(len(candidates), size=k, replace=False)
        taboo = frozenset(candidates[i] for i in pick)
        if _has_safe_path(grid, taboo):
            return grid.with_taboo(taboo)
    raise TabooInfeasibleError(f"no safe taboo draw of size {k} in {max_tries} tries")


def _has_safe_path(grid: GridWorld, taboo) -> bool:
    blocked = grid.walls | frozenset(taboo)
    if grid.start in blocked or grid.goal in blocked:
        return False
    seen = {grid.start}
    queue = deque([grid.start])
    while queue:
        cur = queue.popleft()
        if cur == grid.goal:
            return True
        for dx, dy in DELTAS:
            nxt = (cur[0] + dx, cur[1] + dy)
            if grid.in_bounds(nxt) and nxt not in blocked and nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return False


def greedy_grid_policy(grid: GridWorld, q_values: np.ndarray) -> BasePolicy:
    """Deterministic argmax policy over the grid's state indexing."""
    return BasePolicy.deterministic(np.argmax(q_values, axis=1), N_ACTIONS)
