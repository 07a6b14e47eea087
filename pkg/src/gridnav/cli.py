"""Command-line entry point: ``gridnav <group> <command> [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as gio
from .batch import MetricsRow, run_batch, summarize
from .config import load_config, load_sweep
from .episode import run_episode
from .errors import GridnavError
from .gridness import best_gridness, build_rate_map, sample_rate_map, smooth_rate_map, spatial_autocorrelogram
from .spatial_codes import hex_activity, make_hex_code
from .world import generate_maze

log = logging.getLogger("gridnav")


def cmd_maze_gen(args) -> int:
    maze = generate_maze(args.seed, args.side, n_spawns=args.spawns)
    path = gio.write_maze(maze, args.out)
    log.info("wrote %s", path)
    return 0


def write_episode_outputs(cfg, episode_log, out: Path) -> None:
    row = MetricsRow(cfg.seed, cfg.maze_side, cfg.n_agents, cfg.comm_mode, cfg.bit_budget, episode_log.success,
                     episode_log.steps_used, episode_log.final_iou, episode_log.bits_tx, episode_log.msgs, cfg.digest())
    gio.write_metrics_csv([row], out / "metrics.csv")
    gio._write(out / "maze.txt", episode_log.maze.encode())
    gio._write(out / "config.json", (cfg.to_json() + "\n").encode())
    gio._write(out / "log.json", (episode_log.to_json() + "\n").encode())
    for step, agent_id, belief in episode_log.snapshots:
        gio.write_belief_pgm(belief, out / f"belief_t{step:05d}_a{agent_id}.pgm")


def cmd_episode_run(args) -> int:
    cfg = load_config(args.config)
    episode_log = run_episode(cfg, keep_snapshots=True)
    out = Path(args.out)
    write_episode_outputs(cfg, episode_log, out)
    print(f"success={int(episode_log.success)} steps={episode_log.steps_used} iou={episode_log.final_iou:.4f} "
          f"bits={episode_log.bits_tx} msgs={episode_log.msgs}")
    return 0


def cmd_batch_eval(args) -> int:
    cfgs = load_sweep(args.sweep)
    log.info("running %d episodes on %d worker(s)", len(cfgs), args.jobs)
    rows = run_batch(cfgs, jobs=args.jobs)
    out = Path(args.out)
    gio.write_metrics_csv(rows, out / "metrics.csv")
    summary = summarize(rows)
    gio.write_json(summary, out / "summary.json")
    for s in summary:
        print(f"{s['comm_mode']:>8} budget={s['bit_budget']:<4} n={s['n']:<4} success={s['success_rate']:.3f} "
              f"median_steps={s['median_steps']:.1f} bits={s['mean_bits']:.0f}")
    return 0


def _analyze_units(positions, dwell, acts, names, bin_size, sigma, out: Path):
    xmin, ymin = positions.min(axis=0)
    xmax, ymax = positions.max(axis=0)
    reports = []
    for u, name in enumerate(names):
        rm = build_rate_map(positions, dwell, acts[:, u], (xmin, xmax, ymin, ymax), bin_size)
        if sigma > 0:
            rm = smooth_rate_map(rm, sigma)
        sac = spatial_autocorrelogram(rm)
        rep = best_gridness(sac)
        reports.append((name, rep))
        gio.write_pgm(gio.rate_map_image(rm.bins), out / f"ratemap_{name}.pgm")
        gio.write_sac_pgm(sac, out / f"sac_{name}.pgm")
    gio.write_gridness_csv(reports, out / "gridness.csv")
    return reports


def cmd_analyze_gridness(args) -> int:
    positions, dwell, acts, names = gio.read_trajectory_csv(args.traj)
    for name, rep in _analyze_units(positions, dwell, acts, names, args.bin_size, args.smooth, Path(args.out)):
        print(f"{name}: g60={rep.g60:.4f} g90={rep.g90:.4f}")
    return 0


def cmd_demo_hexcode(args) -> int:
    code = make_hex_code(args.magnitude, np.radians(args.orientation))
    rm = sample_rate_map(lambda r: hex_activity(code, r), args.bins, args.side)
    sac = spatial_autocorrelogram(rm)
    rep = best_gridness(sac)
    out = Path(args.out)
    gio.write_pgm(gio.rate_map_image(rm.bins), out / "ratemap.pgm")
    gio.write_sac_pgm(sac, out / "sac.pgm")
    gio.write_gridness_csv([("hex", rep)], out / "gridness.csv")
    print(f"g60={rep.g60:.4f} g90={rep.g90:.4f} annulus60=({rep.best_annulus_60.r_min}, {rep.best_annulus_60.r_max})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gridnav", description="Maze search simulator and grid-code analysis tools.")
    p.add_argument("-v", "--verbose", action="store_true")
    groups = p.add_subparsers(dest="group", required=True)

    maze = groups.add_parser("maze").add_subparsers(dest="command", required=True)
    g = maze.add_parser("gen", help="generate a maze text file")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--side", type=int, default=29)
    g.add_argument("--spawns", type=int, default=2)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_maze_gen)

    ep = groups.add_parser("episode").add_subparsers(dest="command", required=True)
    r = ep.add_parser("run", help="run one episode from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_episode_run)

    ba = groups.add_parser("batch").add_subparsers(dest="command", required=True)
    e = ba.add_parser("eval", help="run a JSON sweep")
    e.add_argument("--sweep", required=True)
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_batch_eval)

    an = groups.add_parser("analyze").add_subparsers(dest="command", required=True)
    a = an.add_parser("gridness", help="rate maps, SACs and gridness from a trajectory CSV")
    a.add_argument("--traj", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--bin-size", type=float, default=1.0)
    a.add_argument("--smooth", type=float, default=0.0, help="Gaussian smoothing sigma in bins")
    a.set_defaults(func=cmd_analyze_gridness)

    de = groups.add_parser("demo").add_subparsers(dest="command", required=True)
    h = de.add_parser("hexcode", help="synthetic hexagonal rate map with its SAC and gridness")
    h.add_argument("--magnitude", type=float, default=0.9, help="spatial frequency, rad per unit length")
    h.add_argument("--side", type=float, default=64.0, help="arena side length")
    h.add_argument("--bins", type=int, default=64)
    h.add_argument("--orientation", type=float, default=0.0, help="degrees")
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_demo_hexcode)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except GridnavError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
