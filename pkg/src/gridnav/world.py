"""Maze environment, raycast observation, belief maps and map fusion.

Cells are addressed ``(row, col)``.  Row 0 is the top (north) edge, so the
world x axis runs along columns and the y axis runs against rows.  Headings
are 4-way indices counter-clockwise from east: 0=E, 1=N, 2=W, 3=S.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from .errors import InvalidInputError
from .ib_comm import OccupancyImage

DEFAULT_SIDES = (15, 25, 29, 35, 39)
HEADING_VECTORS = ((0, 1), (-1, 0), (0, -1), (1, 0))  # (drow, dcol) for E, N, W, S


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    WALL = 2
    TARGET = 3


class CellBelief(NamedTuple):
    state: CellState
    confidence: float
    timestamp: int


Cell = tuple[int, int]


@dataclass(frozen=True)
class MazeGrid:
    walls: np.ndarray  # bool (side, side)
    target_cell: Cell
    spawn_cells: tuple[Cell, ...]

    def __post_init__(self):
        w = np.asarray(self.walls, dtype=bool)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidInputError("maze must be square")
        w.setflags(write=False)
        object.__setattr__(self, "walls", w)
        object.__setattr__(self, "target_cell", tuple(int(v) for v in self.target_cell))
        object.__setattr__(self, "spawn_cells", tuple(tuple(int(v) for v in c) for c in self.spawn_cells))
        for c in (self.target_cell, *self.spawn_cells):
            if w[c]:
                raise InvalidInputError(f"cell {c} is a wall")

    @property
    def side(self) -> int:
        return self.walls.shape[0]

    def is_free(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.side and 0 <= c < self.side and not self.walls[r, c]

    def truth_state(self, cell: Cell) -> CellState:
        if self.walls[cell]:
            return CellState.WALL
        return CellState.TARGET if cell == self.target_cell else CellState.FREE

    def to_text(self) -> str:
        rows = []
        spawns = set(self.spawn_cells)
        for r in range(self.side):
            line = []
            for c in range(self.side):
                if self.walls[r, c]:
                    line.append("#")
                elif (r, c) == self.target_cell:
                    line.append("T")
                elif (r, c) in spawns:
                    line.append("S")
                else:
                    line.append(".")
            rows.append("".join(line))
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "MazeGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        walls = np.array([[ch == "#" for ch in ln] for ln in lines])
        target = None
        spawns = []
        for r, ln in enumerate(lines):
            for c, ch in enumerate(ln):
                if ch == "T":
                    target = (r, c)
                elif ch == "S":
                    spawns.append((r, c))
        if target is None:
            raise InvalidInputError("maze text has no target cell 'T'")
        return cls(walls, target, tuple(spawns))


def bfs_distances(walls: np.ndarray, start: Cell) -> np.ndarray:
    """4-connected path distance from ``start`` over non-wall cells; -1 if unreachable."""
    n, m = walls.shape
    dist = np.full((n, m), -1, dtype=int)
    dist[start] = 0
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in HEADING_VECTORS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < n and 0 <= cc < m and not walls[rr, cc] and dist[rr, cc] < 0:
                dist[rr, cc] = d
                queue.append((rr, cc))
    return dist


def generate_maze(seed: int, side: int, n_spawns: int = 5, loop_fraction: float = 0.1,
                  spawn_mode: str = "clustered") -> MazeGrid:
    """Recursive-backtracker perfect maze with a fraction of walls knocked out.

    Rooms sit on odd coordinates.  ``spawn_mode`` is ``"clustered"`` (spawns
    are the free cells nearest a random start room, a shared deployment
    point) or ``"scattered"`` (independent random rooms).  The target is a
    random free cell at least ``side // 2`` steps from every spawn.
    """
    if side < 7 or side % 2 == 0:
        raise InvalidInputError(f"side must be odd and >= 7, got {side}")
    if not 0 <= loop_fraction <= 1:
        raise InvalidInputError("loop_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    walls = np.ones((side, side), dtype=bool)
    rooms = (side - 1) // 2
    start = (2 * int(rng.integers(rooms)) + 1, 2 * int(rng.integers(rooms)) + 1)
    walls[start] = False
    stack = [start]
    while stack:
        r, c = stack[-1]
        options = []
        for dr, dc in HEADING_VECTORS:
            rr, cc = r + 2 * dr, c + 2 * dc
            if 0 < rr < side - 1 and 0 < cc < side - 1 and walls[rr, cc]:
                options.append((rr, cc, r + dr, c + dc))
        if not options:
            stack.pop()
            continue
        rr, cc, wr, wc = options[int(rng.integers(len(options)))]
        walls[wr, wc] = False
        walls[rr, cc] = False
        stack.append((rr, cc))

    candidates = []
    for r in range(1, side - 1):
        for c in range(1, side - 1):
            if not walls[r, c]:
                continue
            if r % 2 == 1 and c % 2 == 0 or r % 2 == 0 and c % 2 == 1:
                candidates.append((r, c))
    n_remove = int(round(loop_fraction * len(candidates)))
    if n_remove:
        for i in rng.choice(len(candidates), size=n_remove, replace=False):
            walls[candidates[int(i)]] = False

    free = [tuple(int(v) for v in rc) for rc in np.argwhere(~walls)]
    if spawn_mode == "clustered":
        dist = bfs_distances(walls, start)
        order = sorted(free, key=lambda rc: (dist[rc], rc))
        spawns = order[:n_spawns]
    elif spawn_mode == "scattered":
        room_cells = [rc for rc in free if rc[0] % 2 == 1 and rc[1] % 2 == 1]
        picks = rng.choice(len(room_cells), size=min(n_spawns, len(room_cells)), replace=False)
        spawns = [room_cells[int(i)] for i in picks]
    else:
        raise InvalidInputError(f"unknown spawn_mode {spawn_mode!r}")

    far = np.full(walls.shape, np.iinfo(int).max)
    for s in spawns:
        far = np.minimum(far, bfs_distances(walls, s))
    spawn_set = set(spawns)
    eligible = [rc for rc in free if far[rc] >= side // 2 and rc not in spawn_set]
    if not eligible:
        eligible = [max((rc for rc in free if rc not in spawn_set), key=lambda rc: (far[rc], rc))]
    target = eligible[int(rng.integers(len(eligible)))]
    return MazeGrid(walls, target, tuple(spawns))


# --- observation -----------------------------------------------------------

def _traverse(dr: int, dc: int) -> tuple[Cell, ...]:
    """Cells strictly between (0,0) and (dr,dc) crossed by the segment joining their centres.

    Exact corner crossings step diagonally, so a ray grazing a corner is not
    blocked by the two cells that only touch it.
    """
    if dr == 0 and dc == 0:
        return ()
    cells = []
    # parametrise in units of the segment: t in [0, 1]
    sr = (dr > 0) - (dr < 0)
    sc = (dc > 0) - (dc < 0)
    t_dr = 1.0 / abs(dr) if dr else math.inf
    t_dc = 1.0 / abs(dc) if dc else math.inf
    t_r = 0.5 * t_dr
    t_c = 0.5 * t_dc
    r = c = 0
    while True:
        if abs(t_r - t_c) < 1e-12:
            r += sr
            c += sc
            t_r += t_dr
            t_c += t_dc
        elif t_r < t_c:
            r += sr
            t_r += t_dr
        else:
            c += sc
            t_c += t_dc
        if (r, c) == (dr, dc):
            break
        cells.append((r, c))
    return tuple(cells)


@lru_cache(maxsize=64)
def visibility_table(heading: int, fov_degrees: float, max_range: float) -> tuple[tuple[int, int, float, tuple[Cell, ...]], ...]:
    """Relative cells inside the view cone with the cells each sight line crosses."""
    hdr, hdc = HEADING_VECTORS[heading % 4]
    heading_angle = math.atan2(-hdr, hdc)
    half = math.radians(fov_degrees) / 2.0
    reach = int(math.floor(max_range))
    out = []
    for dr in range(-reach, reach + 1):
        for dc in range(-reach, reach + 1):
            d = math.hypot(dr, dc)
            if d > max_range or (dr == 0 and dc == 0):
                continue
            bearing = math.atan2(-dr, dc)
            diff = abs(math.remainder(bearing - heading_angle, 2 * math.pi))
            if fov_degrees < 360 and diff > half + 1e-9:
                continue
            out.append((dr, dc, d, _traverse(dr, dc)))
    out.sort(key=lambda e: (e[2], e[0], e[1]))
    return tuple(out)


class Observation(NamedTuple):
    cell: Cell
    state: CellState
    distance: float


def observe(maze: MazeGrid, cell: Cell, heading: int, fov_degrees: float = 75.0, max_range: float = 8.0) -> list[Observation]:
    """Cells visible from ``cell`` looking along ``heading``.

    A cell is seen when the sight line from the agent's cell centre to its
    centre crosses no wall first.  The first wall on a line is itself seen.
    """
    if not 0 < fov_degrees <= 360:
        raise InvalidInputError("fov must lie in (0, 360]")
    if max_range < 1:
        raise InvalidInputError("max_range must be >= 1")
    walls = maze.walls
    n = maze.side
    r0, c0 = cell
    result = [Observation((r0, c0), maze.truth_state((r0, c0)), 0.0)]
    for dr, dc, d, path in visibility_table(heading % 4, float(fov_degrees), float(max_range)):
        r, c = r0 + dr, c0 + dc
        if not (0 <= r < n and 0 <= c < n):
            continue
        blocked = False
        for pr, pc in path:
            rr, cc = r0 + pr, c0 + pc
            if not (0 <= rr < n and 0 <= cc < n) or walls[rr, cc]:
                blocked = True
                break
        if not blocked:
            result.append(Observation((r, c), maze.truth_state((r, c)), d))
    return result


# --- beliefs ------------------------------------------------------------------

@dataclass
class AgentState:
    id: int
    cell: Cell
    heading: int
    belief: "BeliefMap"
    tokens: float = 10.0


def observation_confidence(distance: float) -> float:
    return max(0.5, 1.0 - 0.05 * distance)


class BeliefMap:
    """Per-cell occupancy belief with confidence and last-update step."""

    __slots__ = ("state", "confidence", "timestamp")

    def __init__(self, side: int, state=None, confidence=None, timestamp=None):
        self.state = np.zeros((side, side), dtype=np.int8) if state is None else np.asarray(state, dtype=np.int8)
        self.confidence = np.zeros((side, side)) if confidence is None else np.asarray(confidence, dtype=float)
        self.timestamp = np.full((side, side), -1, dtype=np.int64) if timestamp is None else np.asarray(timestamp, dtype=np.int64)

    @property
    def side(self) -> int:
        return self.state.shape[0]

    def copy(self) -> "BeliefMap":
        return BeliefMap(self.side, self.state.copy(), self.confidence.copy(), self.timestamp.copy())

    def __getitem__(self, cell: Cell) -> CellBelief:
        return CellBelief(CellState(int(self.state[cell])), float(self.confidence[cell]), int(self.timestamp[cell]))

    def set(self, cell: Cell, state: CellState, confidence: float, timestamp: int) -> None:
        self.state[cell] = state
        self.confidence[cell] = 0.0 if state == CellState.UNKNOWN else confidence
        self.timestamp[cell] = -1 if state == CellState.UNKNOWN else timestamp

    def __eq__(self, other):
        if not isinstance(other, BeliefMap):
            return NotImplemented
        return (np.array_equal(self.state, other.state) and np.array_equal(self.confidence, other.confidence)
                and np.array_equal(self.timestamp, other.timestamp))

    @property
    def known(self) -> np.ndarray:
        return self.state != CellState.UNKNOWN

    @property
    def free(self) -> np.ndarray:
        """Cells believed traversable (free or target)."""
        return (self.state == CellState.FREE) | (self.state == CellState.TARGET)

    @property
    def wall(self) -> np.ndarray:
        return self.state == CellState.WALL

    def target_cell(self) -> Cell | None:
        hits = np.argwhere(self.state == CellState.TARGET)
        return tuple(int(v) for v in hits[0]) if len(hits) else None


def integrate_observation(belief: BeliefMap, obs: Iterable[Observation], step: int) -> BeliefMap:
    """Write direct observations into ``belief`` in place and return it."""
    state, conf, ts = belief.state, belief.confidence, belief.timestamp
    for cell, s, d in obs:
        c = observation_confidence(d)
        if ts[cell] == step and state[cell] == s:
            if c > conf[cell]:
                conf[cell] = c
            continue
        state[cell] = s
        conf[cell] = c
        ts[cell] = step
    return belief


_PRECEDENCE = np.array([0, 1, 3, 2])  # UNKNOWN < FREE < TARGET < WALL


def fuse_belief(mine: BeliefMap, received: BeliefMap) -> BeliefMap:
    """Merge ``received`` into a copy of ``mine`` cell by cell.

    Newer timestamp wins, then higher confidence, then wall over target over
    free.  An unknown entry never replaces a known one.
    """
    if mine.state.shape != received.state.shape:
        raise InvalidInputError("belief maps differ in size")
    m_known = mine.state != CellState.UNKNOWN
    r_known = received.state != CellState.UNKNOWN
    newer = received.timestamp > mine.timestamp
    same_t = received.timestamp == mine.timestamp
    more_conf = received.confidence > mine.confidence
    same_c = received.confidence == mine.confidence
    stronger = _PRECEDENCE[received.state] > _PRECEDENCE[mine.state]
    take = r_known & (~m_known | newer | same_t & (more_conf | same_c & stronger))
    out = mine.copy()
    out.state[take] = received.state[take]
    out.confidence[take] = received.confidence[take]
    out.timestamp[take] = received.timestamp[take]
    return out


def map_iou(belief: BeliefMap, truth: MazeGrid) -> float:
    """IoU of believed-free and truly-free cell sets; unknown counts as not free."""
    if belief.side != truth.side:
        raise InvalidInputError("belief and maze differ in size")
    a = belief.free
    b = ~truth.walls
    union = np.count_nonzero(a | b)
    return np.count_nonzero(a & b) / union if union else 0.0


@dataclass(frozen=True)
class ExplorationStats:
    explored_ratio: float
    newly_explored: list[Cell]


def exploration_stats(belief: BeliefMap, since: int = 0) -> ExplorationStats:
    ratio = float(np.count_nonzero(belief.known)) / belief.state.size
    fresh = np.argwhere(belief.known & (belief.timestamp >= since))
    return ExplorationStats(ratio, [tuple(int(v) for v in rc) for rc in fresh])


# --- conversions -------------------------------------------------------------

def belief_to_occupancy(belief: BeliefMap, unknown_value: float = 1.0, wall_value: float = 1.0) -> OccupancyImage:
    """Image for the codec: free 0, wall ``wall_value``, unknown ``unknown_value``."""
    img = np.where(belief.wall, wall_value, 0.0)
    img[~belief.known] = unknown_value
    return OccupancyImage(img)


def overlay_from_occupancy(image: OccupancyImage, timestamp: int, confidence: float,
                           claims: str = "free", region: np.ndarray | None = None) -> BeliefMap:
    """Belief overlay built from a decoded occupancy image.

    One bit cannot tell a wall from unexplored space, so only one polarity is
    treated as a claim: ``claims="free"`` turns 0-pixels into free cells and
    leaves 1-pixels unknown; ``claims="both"`` also turns 1-pixels into walls.
    ``region`` optionally restricts the claims to a boolean mask.
    """
    side = image.shape[0]
    ov = BeliefMap(side)
    free = image.values < 0.5
    wall = ~free if claims == "both" else np.zeros_like(free)
    if region is not None:
        free &= region
        wall &= region
    ov.state[free] = CellState.FREE
    ov.state[wall] = CellState.WALL
    known = free | wall
    ov.confidence[known] = confidence
    ov.timestamp[known] = timestamp
    return ov


def belief_pgm_values(belief: BeliefMap) -> np.ndarray:
    lut = np.array([0, 192, 64, 255], dtype=np.uint8)
    return lut[belief.state]
