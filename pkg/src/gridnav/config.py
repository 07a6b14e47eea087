"""Episode configuration and sweep files (JSON)."""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
from dataclasses import dataclass
from pathlib import Path

from .coordination import DEFAULT_GATE_WEIGHTS, N_GATE_FEATURES
from .errors import InvalidConfigError

COMM_MODES = ("none", "periodic", "full", "gated")


@dataclass(frozen=True)
class EpisodeConfig:
    seed: int = 0
    maze_side: int = 29
    n_agents: int = 2
    bit_budget: int = 128
    comm_mode: str = "gated"
    periodic_interval: int = 10
    K_interval: int = 20
    max_steps: int = 800
    dt: float = 1.0
    reward_success: float = 500.0
    reward_step: float = -0.01
    reward_collision: float = -3.0
    d_norm: float = 10.0
    d_min: float = 3.0
    alpha: float = 0.1
    r_local: int = 2
    w_curiosity: float = 1.0
    w_coord: float = 0.5
    w_explore: float = 0.3
    token_initial: float = 10.0
    token_refill: float = 1.0 / 60.0
    d_comm: float = 5.0
    fov_degrees: float = 75.0
    max_range: float = 8.0
    region_grid: int = 4
    gate_weights: tuple = DEFAULT_GATE_WEIGHTS
    policy: str = "greedy"
    curiosity_aggregation: str = "max"
    unknown_cost: float = 1.5
    trust_floor: float = 0.5
    replan_on_contradiction: bool = True
    codec_unknown_value: float = 1.0
    codec_wall_value: float = 0.0
    overlay_confidence: float = 0.3
    partner_noise: float = 0.0
    partner_visibility: bool = False
    drop_prob: float = 0.0
    spawn_mode: str = "clustered"
    loop_fraction: float = 0.1
    log_interval: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gate_weights", tuple(float(w) for w in self.gate_weights))
        self.validate()

    def validate(self) -> None:
        problems = []
        if self.maze_side < 7 or self.maze_side % 2 == 0:
            problems.append("maze_side must be odd and >= 7")
        if not 1 <= self.n_agents <= 5:
            problems.append("n_agents must lie in 1..5")
        if self.bit_budget < 1:
            problems.append("bit_budget must be >= 1")
        if self.comm_mode not in COMM_MODES:
            problems.append(f"comm_mode must be one of {COMM_MODES}")
        for name in ("periodic_interval", "K_interval", "max_steps", "region_grid"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be >= 1")
        for name in ("dt", "d_norm", "token_initial", "d_comm", "max_range"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        for name in ("d_min", "alpha", "r_local", "token_refill", "partner_noise", "log_interval"):
            if getattr(self, name) < 0:
                problems.append(f"{name} must be non-negative")
        if not 0 < self.fov_degrees <= 360:
            problems.append("fov_degrees must lie in (0, 360]")
        if len(self.gate_weights) != N_GATE_FEATURES:
            problems.append("gate_weights needs 9 entries")
        if not 0 <= self.drop_prob <= 1 or not 0 <= self.loop_fraction <= 1:
            problems.append("drop_prob and loop_fraction must lie in [0, 1]")
        if not 0 < self.overlay_confidence <= 1 or not 0 <= self.codec_unknown_value <= 1:
            problems.append("overlay_confidence must lie in (0, 1], codec_unknown_value in [0, 1]")
        if self.curiosity_aggregation not in ("max", "mean"):
            problems.append("curiosity_aggregation must be 'max' or 'mean'")
        if self.unknown_cost < 1:
            problems.append("unknown_cost must be >= 1")
        if problems:
            raise InvalidConfigError("; ".join(problems))

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w_curiosity, self.w_coord, self.w_explore)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["gate_weights"] = list(self.gate_weights)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:12]

    def replace(self, **changes) -> "EpisodeConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, d: dict) -> "EpisodeConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = sorted(set(d) - known)
        if extra:
            raise InvalidConfigError(f"unknown config keys: {', '.join(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc


def load_config(path) -> EpisodeConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"{path}: {exc}") from exc
    return EpisodeConfig.from_dict(data)


def expand_sweep(spec: dict) -> list[EpisodeConfig]:
    """Cartesian product of ``grid`` over ``seeds`` on top of ``base``.

    ``{"base": {...}, "grid": {"comm_mode": ["none", "gated"]}, "seeds": [0, 1]}``;
    ``seeds`` may also be ``{"start": 0, "count": 100}``.
    """
    base = spec.get("base", {})
    grid = spec.get("grid", {})
    seeds = spec.get("seeds", [base.get("seed", 0)])
    if isinstance(seeds, dict):
        seeds = list(range(int(seeds.get("start", 0)), int(seeds.get("start", 0)) + int(seeds["count"])))
    keys = sorted(grid)
    combos = list(itertools.product(*(grid[k] for k in keys))) or [()]
    cfgs = []
    for seed in seeds:
        for combo in combos:
            cfgs.append(EpisodeConfig.from_dict({**base, **dict(zip(keys, combo)), "seed": int(seed)}))
    if not cfgs:
        raise InvalidConfigError("sweep expands to no episodes")
    return cfgs


def load_sweep(path) -> list[EpisodeConfig]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidConfigError(f"{path}: {exc}") from exc
    return expand_sweep(data)
