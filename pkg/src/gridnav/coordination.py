"""Regional summaries, frontier curiosity, intrinsic rewards, message gating and goal choice."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import ExplorationComplete, InsufficientTokensError, InvalidInputError
from .world import HEADING_VECTORS, BeliefMap, Cell

DEFAULT_WEIGHTS = (1.0, 0.5, 0.3)
N_GATE_FEATURES = 9
LOCATION_TYPES = ("junction", "corridor", "deadend", "openarea")
# progress, tokens, local confidence, connectivity, junction, corridor, dead end, open area, bias
DEFAULT_GATE_WEIGHTS = (6.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 0.5, -2.5)


@lru_cache(maxsize=32)
def region_bounds(side: int, g: int) -> tuple[tuple[int, int, int, int], ...]:
    """(row0, row1, col0, col1) for each of the g*g regions, row-major; edge tiles may be short."""
    if g < 1:
        raise InvalidInputError("grid factor must be >= 1")
    s = -(-side // g)
    out = []
    for i in range(g):
        for j in range(g):
            out.append((min(i * s, side), min((i + 1) * s, side), min(j * s, side), min((j + 1) * s, side)))
    return tuple(out)


def region_of(cell: Cell, side: int, g: int) -> int:
    s = -(-side // g)
    return (cell[0] // s) * g + cell[1] // s


def region_center(idx: int, side: int, g: int) -> tuple[float, float]:
    r0, r1, c0, c1 = region_bounds(side, g)[idx]
    return ((r0 + r1 - 1) / 2.0, (c0 + c1 - 1) / 2.0)


@dataclass(frozen=True)
class RegionalSummary:
    g: int
    exploration_ratio: np.ndarray  # (g*g,)
    walkability_ratio: np.ndarray
    agent_present: np.ndarray

    @property
    def features(self) -> np.ndarray:
        return np.stack([self.exploration_ratio, self.walkability_ratio, self.agent_present], axis=1).ravel()


def regional_summary(belief: BeliefMap, agents: Sequence[Cell] = (), g: int = 4) -> RegionalSummary:
    known = belief.known
    free = belief.free
    expl, walk, present = [], [], []
    occupied = set(region_of(a, belief.side, g) for a in agents)
    for idx, (r0, r1, c0, c1) in enumerate(region_bounds(belief.side, g)):
        total = (r1 - r0) * (c1 - c0)
        k = int(np.count_nonzero(known[r0:r1, c0:c1]))
        f = int(np.count_nonzero(free[r0:r1, c0:c1]))
        expl.append(k / total if total else 1.0)
        walk.append(f / k if k else 0.0)
        present.append(1.0 if idx in occupied else 0.0)
    return RegionalSummary(g, np.array(expl), np.array(walk), np.array(present))


def curiosity_map(belief: BeliefMap, agent_pos: Cell, decay: float = 0.1) -> np.ndarray:
    """Frontier score (unknown 4-neighbours / 4) * exp(-decay * distance), scaled to max 1."""
    unknown = ~belief.known
    pad = np.pad(unknown, 1, constant_values=False)
    count = (pad[:-2, 1:-1].astype(int) + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:])
    frontier = belief.free & (count > 0)
    out = np.zeros(unknown.shape)
    if not frontier.any():
        return out
    rows, cols = np.indices(unknown.shape)
    dist = np.hypot(rows - agent_pos[0], cols - agent_pos[1])
    out[frontier] = count[frontier] / 4.0 * np.exp(-decay * dist[frontier])
    return out / out.max()


def regional_curiosity(curiosity: np.ndarray, g: int = 4, how: str = "max") -> np.ndarray:
    """Per-region curiosity, the peak cell (``"max"``) or the cell average (``"mean"``)."""
    if how not in ("max", "mean"):
        raise InvalidInputError(f"unknown aggregation {how!r}")
    vals = []
    for r0, r1, c0, c1 in region_bounds(curiosity.shape[0], g):
        block = curiosity[r0:r1, c0:c1]
        if not block.size:
            vals.append(0.0)
        else:
            vals.append(float(block.max() if how == "max" else block.mean()))
    return np.array(vals)


@dataclass(frozen=True)
class PartnerEstimate:
    partner_id: int
    distance_cells: float
    position: Cell

    def __post_init__(self):
        if not self.distance_cells >= 0:
            raise InvalidInputError(f"distance must be non-negative, got {self.distance_cells}")


def estimate_partner(partner_id: int, observer: Cell, partner: Cell, noise: float = 0.0, rng=None) -> PartnerEstimate:
    """Euclidean cell distance, optionally blurred by uniform noise of half-width ``noise``."""
    d = math.hypot(partner[0] - observer[0], partner[1] - observer[1])
    if noise > 0:
        d = max(0.0, d + float(rng.uniform(-noise, noise)))
    return PartnerEstimate(partner_id, d, partner)


def coordination_reward(estimates: Sequence[PartnerEstimate] | Sequence[float], d_norm: float = 10.0, d_min: float = 3.0) -> float:
    """Separation reward: sum of min(d / d_norm, 1) over partners at least d_min away."""
    if not d_norm > 0 or d_min < 0:
        raise InvalidInputError("need d_norm > 0 and d_min >= 0")
    total = 0.0
    for e in estimates:
        d = e.distance_cells if isinstance(e, PartnerEstimate) else float(e)
        if d < 0:
            raise InvalidInputError(f"negative distance {d}")
        if d >= d_min:
            total += min(d / d_norm, 1.0)
    return total


def exploration_reward(newly_revealed: Sequence[Cell], agent_pos: Cell, alpha: float = 0.1, r_local: int = 2) -> float:
    """Distance-discounted count of team-new cells near the agent.

    ``newly_revealed`` lists cells unknown to the whole team before this step
    and now known to the agent.  Only cells within Chebyshev radius
    ``r_local`` count.
    """
    if alpha < 0:
        raise InvalidInputError("alpha must be non-negative")
    total = 0.0
    r0, c0 = agent_pos
    for r, c in newly_revealed:
        if max(abs(r - r0), abs(c - c0)) <= r_local:
            total += math.exp(-alpha * math.hypot(r - r0, c - c0))
    return total


@dataclass(frozen=True)
class IntrinsicRewardBreakdown:
    curiosity: float
    coordination: float
    exploration: float
    composite: float
    weights: tuple[float, float, float]

    def as_dict(self) -> dict:
        return {"curiosity": self.curiosity, "coordination": self.coordination,
                "exploration": self.exploration, "composite": self.composite}


def intrinsic_reward(curiosity: float, coord: float, explore: float, weights=DEFAULT_WEIGHTS) -> IntrinsicRewardBreakdown:
    w = tuple(float(x) for x in weights)
    if len(w) != 3:
        raise InvalidInputError("need exactly three weights")
    return IntrinsicRewardBreakdown(curiosity, coord, explore, w[0] * curiosity + w[1] * coord + w[2] * explore, w)


# --- gating -------------------------------------------------------------------

def classify_location(belief: BeliefMap, cell: Cell) -> str:
    """Junction / corridor / dead end / open area from the believed-free neighbourhood."""
    n = belief.side
    free = belief.free
    r, c = cell
    open_dirs = [k for k, (dr, dc) in enumerate(HEADING_VECTORS)
                 if 0 <= r + dr < n and 0 <= c + dc < n and free[r + dr, c + dc]]
    count = len(open_dirs)
    if count >= 3:
        return "junction"
    if count == 2:
        a, b = open_dirs
        return "corridor" if (b - a) % 4 == 2 else "junction"
    if count == 1:
        return "deadend"
    window = free[max(r - 1, 0):r + 2, max(c - 1, 0):c + 2]
    return "openarea" if np.count_nonzero(window) >= 7 else "corridor"


@dataclass(frozen=True)
class GatingFeatures:
    exploration_progress: float
    tokens_normalized: float
    local_confidence: float
    connectivity: float
    location: str
    bias: float = 1.0

    def __post_init__(self):
        if self.location not in LOCATION_TYPES:
            raise InvalidInputError(f"unknown location type {self.location!r}")

    @property
    def vector(self) -> np.ndarray:
        onehot = [1.0 if self.location == t else 0.0 for t in LOCATION_TYPES]
        return np.array([self.exploration_progress, self.tokens_normalized, self.local_confidence,
                         self.connectivity, *onehot, self.bias])


def gating_features(cell: Cell, belief: BeliefMap, tokens: "TokenBudget", summary: RegionalSummary | None = None,
                    local_window: int = 3) -> GatingFeatures:
    if summary is None:
        summary = regional_summary(belief, [cell])
    half = local_window // 2
    r, c = cell
    window = belief.confidence[max(r - half, 0):r + half + 1, max(c - half, 0):c + half + 1]
    n = belief.side
    nbrs = sum(1 for dr, dc in HEADING_VECTORS
               if 0 <= r + dr < n and 0 <= c + dc < n and belief.free[r + dr, c + dc])
    return GatingFeatures(
        float(summary.exploration_ratio.mean()),
        tokens.current / tokens.initial,
        float(window.mean()),
        nbrs / 4.0,
        classify_location(belief, cell),
    )


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def gate_decision(f: GatingFeatures | np.ndarray, weights: Sequence[float], partner_in_range: bool, tokens_available: bool) -> bool:
    """Logistic gate behind the range and token checks; sigma = 0.5 transmits."""
    if not (partner_in_range and tokens_available):
        return False
    x = f.vector if isinstance(f, GatingFeatures) else np.asarray(f, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.shape != (N_GATE_FEATURES,) or x.shape != (N_GATE_FEATURES,):
        raise InvalidInputError("gate weights and features must both have length 9")
    return sigmoid(float(w @ x)) >= 0.5


@dataclass
class TokenBudget:
    current: float = 10.0
    initial: float = 10.0
    refill_rate: float = 1.0 / 60.0

    def __post_init__(self):
        if not self.initial > 0 or self.refill_rate < 0:
            raise InvalidInputError("need initial > 0 and refill_rate >= 0")
        if not 0 <= self.current <= self.initial:
            raise InvalidInputError("current must lie in [0, initial]")

    @property
    def available(self) -> bool:
        return self.current >= 1.0


def tick_tokens(b: TokenBudget, transmitted: bool) -> TokenBudget:
    """Spend one token per transmission, then refill, clamped to [0, initial]."""
    if transmitted and not b.available:
        raise InsufficientTokensError(f"cannot transmit with {b.current:.4f} tokens")
    cur = b.current - (1.0 if transmitted else 0.0) + b.refill_rate
    return TokenBudget(min(max(cur, 0.0), b.initial), b.initial, b.refill_rate)


# --- goal selection -------------------------------------------------------------

@dataclass(frozen=True)
class GoalChoice:
    region: int
    scores: np.ndarray
    reward: IntrinsicRewardBreakdown | None = None


def greedy_policy(summary: RegionalSummary, curiosity: np.ndarray, partner_cells: Sequence[Cell], side: int,
                  weights=DEFAULT_WEIGHTS, d_norm: float = 10.0, d_min: float = 3.0) -> np.ndarray:
    """Score per region: intrinsic reward of its curiosity and separation from partners."""
    scores = np.empty(summary.g**2)
    for idx in range(summary.g**2):
        cr, cc = region_center(idx, side, summary.g)
        dists = [math.hypot(cr - p[0], cc - p[1]) for p in partner_cells]
        scores[idx] = intrinsic_reward(float(curiosity[idx]), coordination_reward(dists, d_norm, d_min), 0.0, weights).composite
    return scores


POLICIES: dict[str, Callable[..., np.ndarray]] = {"greedy": greedy_policy}


def select_goal(summary: RegionalSummary, curiosity: np.ndarray, partner_cells: Sequence[Cell], side: int,
                policy: str = "greedy", target_region: int | None = None, **kwargs) -> GoalChoice:
    """Highest-scoring unmasked region; a known target's region always wins.

    Regions are masked when fully explored or when they hold no frontier.
    Ties go to the lowest index.
    """
    if target_region is not None:
        return GoalChoice(int(target_region), np.zeros(summary.g**2))
    try:
        scorer = POLICIES[policy]
    except KeyError:
        raise InvalidInputError(f"unknown policy {policy!r}") from None
    curiosity = np.asarray(curiosity, dtype=float)
    scores = scorer(summary, curiosity, partner_cells, side, **kwargs)
    masked = (summary.exploration_ratio >= 1.0) | (curiosity <= 0.0)
    if masked.all():
        raise ExplorationComplete("every region is explored or frontier-free")
    scores = np.where(masked, -np.inf, scores)
    return GoalChoice(int(np.argmax(scores)), scores)


def goal_cell_in_region(curiosity: np.ndarray, region: int, g: int) -> Cell:
    """Most curious cell of the region; ties to the lowest row-major index."""
    r0, r1, c0, c1 = region_bounds(curiosity.shape[0], g)[region]
    block = curiosity[r0:r1, c0:c1]
    i = int(np.argmax(block))
    return (r0 + i // block.shape[1], c0 + i % block.shape[1])
