"""A* over a belief map and conversion of cell paths to discrete actions."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError
from .world import HEADING_VECTORS, BeliefMap, Cell, CellState

UNKNOWN_COST = 1.5


class ActionStep(Enum):
    MOVE_FORWARD = "MoveForward"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    STAY = "Stay"


@dataclass(frozen=True)
class PlanResult:
    path: list[Cell]
    cost: float
    expanded: int

    @property
    def found(self) -> bool:
        return self.cost < float("inf")

    @property
    def steps(self) -> int:
        return max(len(self.path) - 1, 0)


def astar(belief: BeliefMap, start: Cell, goal: Cell, unknown_cost: float = UNKNOWN_COST,
          trust_floor: float = 0.0) -> PlanResult:
    """Cheapest 4-connected path avoiding believed walls.

    Entering a free cell costs 1 and an unknown cell ``unknown_cost``.  Free
    cells held with confidence below ``trust_floor`` are priced as unknown.
    Ties on f are broken by smaller h, then by row-major index.  Returns an
    empty path when the goal cannot be reached.
    """
    n = belief.side
    for c in (start, goal):
        if not (0 <= c[0] < n and 0 <= c[1] < n):
            raise InvalidInputError(f"cell {c} outside the {n}x{n} map")
    if unknown_cost < 1:
        raise InvalidInputError("unknown_cost must be >= 1 to keep the heuristic admissible")
    blocked = belief.state == CellState.WALL
    if blocked[goal]:
        return PlanResult([], float("inf"), 0)
    uncertain = (belief.state == CellState.UNKNOWN) | (belief.confidence < trust_floor)
    step_cost = np.where(uncertain, unknown_cost, 1.0).tolist()
    blocked = blocked.tolist()
    gr, gc = goal
    g = {start: 0.0}
    parent = {start: None}
    h0 = abs(start[0] - gr) + abs(start[1] - gc)
    heap = [(float(h0), h0, start[0] * n + start[1], start)]
    closed = set()
    expanded = 0
    while heap:
        _, _, _, cell = heapq.heappop(heap)
        if cell in closed:
            continue
        closed.add(cell)
        expanded += 1
        if cell == goal:
            path = []
            while cell is not None:
                path.append(cell)
                cell = parent[cell]
            return PlanResult(path[::-1], g[goal], expanded)
        r, c = cell
        base = g[cell]
        for dr, dc in HEADING_VECTORS:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < n and 0 <= cc < n) or blocked[rr][cc]:
                continue
            nxt = (rr, cc)
            if nxt in closed:
                continue
            ng = base + step_cost[rr][cc]
            if ng < g.get(nxt, float("inf")):
                g[nxt] = ng
                parent[nxt] = cell
                h = abs(rr - gr) + abs(cc - gc)
                heapq.heappush(heap, (ng + h, h, rr * n + cc, nxt))
    return PlanResult([], float("inf"), expanded)


def heading_between(a: Cell, b: Cell) -> int:
    d = (b[0] - a[0], b[1] - a[1])
    try:
        return HEADING_VECTORS.index(d)
    except ValueError:
        raise InvalidInputError(f"cells {a} and {b} are not 4-neighbours") from None


def turn_actions(heading: int, wanted: int) -> list[ActionStep]:
    """Shortest turn sequence; a reversal is two left turns."""
    diff = (wanted - heading) % 4
    return {0: [], 1: [ActionStep.TURN_LEFT], 2: [ActionStep.TURN_LEFT] * 2, 3: [ActionStep.TURN_RIGHT]}[diff]


def path_to_actions(path: list[Cell], heading: int) -> list[ActionStep]:
    out: list[ActionStep] = []
    for a, b in zip(path, path[1:]):
        wanted = heading_between(a, b)
        out += turn_actions(heading, wanted)
        out.append(ActionStep.MOVE_FORWARD)
        heading = wanted
    return out
