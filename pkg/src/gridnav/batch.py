"""Batch evaluation over episode configs, with bootstrap summaries."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np

from .config import EpisodeConfig
from .episode import run_episode

CSV_FIELDS = ("seed", "side", "agents", "comm_mode", "bit_budget", "success", "steps", "iou", "bits_tx", "msgs")


@dataclass(frozen=True)
class MetricsRow:
    seed: int
    side: int
    agents: int
    comm_mode: str
    bit_budget: int
    success: bool
    steps: int
    iou: float
    bits_tx: int
    msgs: int
    digest: str = ""

    def csv_values(self) -> list[str]:
        return [str(self.seed), str(self.side), str(self.agents), self.comm_mode, str(self.bit_budget),
                str(int(self.success)), str(self.steps), f"{self.iou:.6f}", str(self.bits_tx), str(self.msgs)]


def evaluate(cfg: EpisodeConfig) -> MetricsRow:
    log = run_episode(cfg)
    return MetricsRow(cfg.seed, cfg.maze_side, cfg.n_agents, cfg.comm_mode, cfg.bit_budget, log.success,
                      log.steps_used, log.final_iou, log.bits_tx, log.msgs, cfg.digest())


def run_batch(cfgs: Sequence[EpisodeConfig], jobs: int = 1) -> list[MetricsRow]:
    """Run every config; rows come back sorted by seed, then by sweep position."""
    cfgs = list(cfgs)
    if not cfgs:
        return []
    if jobs <= 1:
        rows = [evaluate(c) for c in cfgs]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(evaluate, cfgs, chunksize=max(1, len(cfgs) // (4 * jobs))))
    order = sorted(range(len(cfgs)), key=lambda i: (cfgs[i].seed, i))
    return [rows[i] for i in order]


def bootstrap_ci(values, stat: Callable = np.mean, n_boot: int = 2000, level: float = 0.95, seed: int = 0) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(v), (n_boot, len(v)))
    boots = np.apply_along_axis(stat, 1, v[idx])
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2])
    return float(lo), float(hi)


def paired_bootstrap_pvalue(better, worse, stat: Callable = np.mean, n_boot: int = 5000, seed: int = 0) -> float:
    """One-sided p-value that stat(better) > stat(worse), resampling paired seeds.

    The p-value is the share of resamples in which the difference is not
    positive.
    """
    a = np.asarray(better, dtype=float)
    b = np.asarray(worse, dtype=float)
    if a.shape != b.shape:
        raise ValueError("paired samples differ in length")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, len(a), (n_boot, len(a)))
    diff = np.apply_along_axis(stat, 1, a[idx]) - np.apply_along_axis(stat, 1, b[idx])
    return float(np.mean(diff <= 0))


def summarize(rows: Sequence[MetricsRow]) -> list[dict]:
    """Per (side, agents, comm_mode, bit_budget) group: rates, medians and 95% bootstrap CIs."""
    groups: dict[tuple, list[MetricsRow]] = {}
    for r in rows:
        groups.setdefault((r.side, r.agents, r.comm_mode, r.bit_budget), []).append(r)
    out = []
    for key in sorted(groups):
        g = groups[key]
        succ = np.array([r.success for r in g], dtype=float)
        steps = np.array([r.steps for r in g], dtype=float)
        lo_s, hi_s = bootstrap_ci(succ)
        lo_m, hi_m = bootstrap_ci(steps, np.median)
        out.append({
            "side": key[0], "agents": key[1], "comm_mode": key[2], "bit_budget": key[3], "n": len(g),
            "success_rate": float(succ.mean()), "success_ci_lo": lo_s, "success_ci_hi": hi_s,
            "median_steps": float(np.median(steps)), "median_ci_lo": lo_m, "median_ci_hi": hi_m,
            "mean_steps": float(steps.mean()),
            "mean_iou": float(np.mean([r.iou for r in g])),
            "mean_bits": float(np.mean([r.bits_tx for r in g])),
        })
    return out


def rows_as_dicts(rows: Sequence[MetricsRow]) -> list[dict]:
    return [asdict(r) for r in rows]
