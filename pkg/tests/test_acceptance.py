"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line with its runtime."""
import math
import time

import numpy as np
import pytest

from gridnav.batch import paired_bootstrap_pvalue, run_batch
from gridnav.config import EpisodeConfig
from gridnav.coordination import TokenBudget, coordination_reward, exploration_reward, intrinsic_reward, tick_tokens
from gridnav.episode import run_episode
from gridnav.geometry import (FrequencyVector, MotorCommand, PhaseState, Pose, RigidTransform, angle_difference,
                              apply_rigid, integrate_path, phase_closed_form, phase_step)
from gridnav.gridness import RateMap, best_gridness, build_rate_map, sample_rate_map, spatial_autocorrelogram
from gridnav.ib_comm import GaussianLatent, decode_map, encode_map, gaussian_kl, kl_monte_carlo
from gridnav.spatial_codes import GridCode, hex_activity, isotropy_check, make_hex_code, make_square_code
from gridnav.world import belief_to_occupancy, fuse_belief, overlay_from_occupancy


def report(capsys, number: int, name: str, ok: bool, detail: str, elapsed: float, limit: float):
    in_time = elapsed < limit
    verdict = "PASS" if ok and in_time else "FAIL"
    with capsys.disabled():
        print(f"\n[{verdict}] criterion {number:>2} {name}: {detail} ({elapsed:.2f}s, limit {limit:g}s)")
    assert ok, detail
    assert in_time, f"took {elapsed:.2f}s, limit {limit:g}s"


def random_commands(rng, n):
    v = rng.uniform(-2, 2, (n, 2))
    w = rng.uniform(-1.5, 1.5, n)
    return [MotorCommand((a, b), c) for (a, b), c in zip(v, w)]


def test_c01_equivariance(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst_pos = worst_head = 0.0
    for _ in range(1000):
        cmds = random_commands(rng, 100)
        p0 = Pose(tuple(rng.uniform(-10, 10, 2)), float(rng.uniform(0, 2 * math.pi)))
        g = RigidTransform(tuple(rng.uniform(-50, 50, 2)), float(rng.uniform(-math.pi, math.pi)))
        a = integrate_path(apply_rigid(g, p0), cmds, 0.1)
        b = apply_rigid(g, integrate_path(p0, cmds, 0.1))
        worst_pos = max(worst_pos, math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1]))
        worst_head = max(worst_head, angle_difference(a.heading, b.heading))
    ok = worst_pos <= 1e-9 and worst_head <= 1e-9
    report(capsys, 1, "equivariance", ok, f"max position error {worst_pos:.2e}, heading error {worst_head:.2e}",
           time.perf_counter() - t0, 5)


def test_c02_phase_encoding(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(1000):
        q = FrequencyVector.from_angle(float(rng.uniform(0, 2 * math.pi)), float(rng.uniform(0.1, 3.0)))
        steps = rng.normal(0, 0.5, (100, 2))
        y = PhaseState((1.0, 0.0))
        for dr in steps:
            y = phase_step(y, q, dr)
        want = phase_closed_form(q, steps.sum(axis=0))
        worst = max(worst, abs(y.y[0] - want.y[0]), abs(y.y[1] - want.y[1]))
    report(capsys, 2, "phase encoding", worst <= 1e-9, f"max component error {worst:.2e}",
           time.perf_counter() - t0, 2)


def test_c03_isotropy(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(103)
    worst = 0.0
    lam_exact = True
    for _ in range(200):
        rep = isotropy_check(make_hex_code(float(rng.uniform(0.1, 5)), float(rng.uniform(-10, 10))))
        worst = max(worst, rep.first_order_residual, rep.second_order_residual)
        lam_exact &= rep.lam == 1.5
    pairs_fail = True
    for _ in range(200):
        angle = float(rng.uniform(0, 2 * math.pi))
        pair = GridCode((FrequencyVector.from_angle(angle, 1.0), FrequencyVector.from_angle(angle + math.pi, 1.0)))
        u = pair.directions()
        rank_one = np.linalg.matrix_rank(u.T @ u, tol=1e-9) == 1
        pairs_fail &= rank_one and isotropy_check(pair).second_order_residual > 0.5 and not isotropy_check(pair).isotropic
    square_fails = not isotropy_check(make_square_code(1.0)).isotropic
    ok = worst <= 1e-12 and lam_exact and pairs_fail and square_fails
    report(capsys, 3, "isotropy", ok, f"hex max residual {worst:.1e}, lambda exact {lam_exact}, "
           f"two-component codes rejected {pairs_fail and square_fails}", time.perf_counter() - t0, 1)


def test_c04_hexagonality(capsys):
    t0 = time.perf_counter()
    spacing = 8.0  # bins; 64 bins hold 8 lattice periods
    hexmap = sample_rate_map(lambda r: hex_activity(make_hex_code(4 * math.pi / (math.sqrt(3) * spacing)), r), 64, 64.0)
    hexrep = best_gridness(spatial_autocorrelogram(hexmap))
    sqmap = sample_rate_map(lambda r: hex_activity(make_square_code(2 * math.pi / spacing), r), 64, 64.0)
    sqrep = best_gridness(spatial_autocorrelogram(sqmap))
    rng = np.random.default_rng(104)
    noise = []
    for _ in range(100):
        v = rng.standard_normal((64, 64))
        noise.append(best_gridness(spatial_autocorrelogram(RateMap(v, np.ones_like(v), 1.0))).g60)
    med = float(np.median(noise))
    ok = hexrep.g60 >= 0.8 and hexrep.g60 > hexrep.g90 and sqrep.g90 > sqrep.g60 and abs(med) < 0.2
    report(capsys, 4, "hexagonality", ok, f"hex g60={hexrep.g60:.3f} g90={hexrep.g90:.3f}; square g60={sqrep.g60:.3f} "
           f"g90={sqrep.g90:.3f}; noise median g60={med:.3f}", time.perf_counter() - t0, 30)


def test_c05_kl_closed_form(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(105)
    worst = 0.0
    for i in range(100):
        z = int(rng.integers(1, 9))
        lat = GaussianLatent(rng.normal(0, 1, z), np.exp(rng.uniform(-1.5, 1.0, z)))
        mc, se = kl_monte_carlo(lat, 100_000, seed=i)
        worst = max(worst, abs(mc - gaussian_kl(lat)) / se)
    report(capsys, 5, "KL closed form", worst <= 3.0, f"max |closed - MC| = {worst:.2f} standard errors",
           time.perf_counter() - t0, 20)


def _rate_map_brute_force(pos, dwell, acts, n):
    s = np.zeros((n, n))
    o = np.zeros((n, n))
    for (x, y), d, a in zip(pos, dwell, acts):
        i = n - 1 if x == n else int(math.floor(x))
        j = n - 1 if y == n else int(math.floor(y))
        if 0 <= i < n and 0 <= j < n:
            s[i, j] += a
            o[i, j] += d
    out = np.full((n, n), np.nan)
    out[o > 0] = s[o > 0] / o[o > 0]
    return out


def test_c06_rate_map_oracle(capsys):
    t0 = time.perf_counter()
    rng = np.random.default_rng(106)
    exact = True
    for _ in range(50):
        k = int(rng.integers(20, 300))
        pos = rng.uniform(-0.5, 10.5, (k, 2))
        pos[rng.uniform(size=k) < 0.05] = 10.0
        dwell = rng.uniform(0.01, 1.0, k)
        acts = rng.normal(0, 2, k)
        got = build_rate_map(pos, dwell, acts, (0, 10, 0, 10), 1.0).bins
        want = _rate_map_brute_force(pos, dwell, acts, 10)
        exact &= bool(np.array_equal(got, want, equal_nan=True))
    report(capsys, 6, "rate-map oracle", exact, "exact equality on 50 inputs" if exact else "mismatch",
           time.perf_counter() - t0, 1)


def test_c07_reward_arithmetic(capsys):
    t0 = time.perf_counter()
    checks = {
        "coord d=5": coordination_reward([5.0]) == 0.5,
        "coord d=2": coordination_reward([2.0]) == 0.0,
        "coord d=20": coordination_reward([20.0]) == 1.0,
        "explore d=2": exploration_reward([(4, 6)], (4, 4)) == math.exp(-0.2),
        "composite": intrinsic_reward(1.0, 0.5, 1.0, (1.0, 0.5, 0.3)).composite == 1.55,
        "composite zero": intrinsic_reward(0.0, 0.0, 0.0).composite == 0.0,
    }
    bad = [k for k, v in checks.items() if not v]
    report(capsys, 7, "reward arithmetic", not bad, "all exact" if not bad else f"failed: {bad}",
           time.perf_counter() - t0, 1)


def test_c08_protocol_invariants(capsys):
    t0 = time.perf_counter()
    problems = []
    n_msgs = 0
    for seed in range(100):
        budget = (4, 16, 64, 128)[seed % 4]
        cfg = EpisodeConfig(seed=seed, bit_budget=budget, comm_mode="gated")
        log = run_episode(cfg, keep_snapshots=True)
        iou = [s["team_iou"] for s in log.steps]
        if any(b < a - 1e-12 for a, b in zip(iou, iou[1:])):
            problems.append(f"seed {seed}: team IoU decreased")
        for s in log.steps:
            for ag in s["agents"]:
                if not 0.0 <= ag["tokens"] <= 10.0:
                    problems.append(f"seed {seed}: tokens {ag['tokens']}")
            for m in s["messages"]:
                n_msgs += 1
                if m["bits"] > budget:
                    problems.append(f"seed {seed}: {m['bits']} bits > {budget}")
        final = [b for t, _, b in log.snapshots if t == log.steps_used]
        for mine, theirs in ((final[0], final[1]), (final[1], final[0])):
            msg = encode_map(belief_to_occupancy(theirs, cfg.codec_unknown_value, cfg.codec_wall_value), budget)
            overlay = overlay_from_occupancy(decode_map(msg, mine.side), 0, cfg.overlay_confidence)
            once = fuse_belief(mine, overlay)
            if fuse_belief(once, overlay) != once or fuse_belief(once, theirs) != fuse_belief(fuse_belief(once, theirs), theirs):
                problems.append(f"seed {seed}: fusion not idempotent")
    # the refill schedule: ten tokens from empty take 600 steps
    b = TokenBudget(0.0)
    for _ in range(600):
        b = tick_tokens(b, False)
    if b.current != pytest.approx(10.0):
        problems.append(f"refill reached {b.current} after 600 steps")
    report(capsys, 8, "protocol invariants", not problems,
           f"100 episodes, {n_msgs} messages, no violations" if not problems else "; ".join(problems[:5]),
           time.perf_counter() - t0, 120)


def test_c09_communication_benefit(capsys):
    t0 = time.perf_counter()
    seeds = range(200)
    modes = ("none", "gated", "periodic", "full")
    cfgs = [EpisodeConfig(seed=s, comm_mode=m, maze_side=29, n_agents=2) for s in seeds for m in modes]
    rows = run_batch(cfgs)
    by = {m: sorted((r for r in rows if r.comm_mode == m), key=lambda r: r.seed) for m in modes}
    succ = {m: np.array([r.success for r in by[m]], dtype=float) for m in modes}
    steps = {m: np.array([r.steps for r in by[m]], dtype=float) for m in modes}
    bits = {m: sum(r.bits_tx for r in by[m]) for m in modes}
    p_succ = paired_bootstrap_pvalue(succ["gated"], succ["none"], np.mean)
    p_steps = paired_bootstrap_pvalue(steps["none"], steps["gated"], np.median)
    ok = (succ["gated"].mean() > succ["none"].mean() and np.median(steps["gated"]) < np.median(steps["none"])
          and p_succ < 0.05 and p_steps < 0.05 and bits["gated"] < bits["periodic"] < bits["full"])
    detail = (f"success none={succ['none'].mean():.3f} gated={succ['gated'].mean():.3f} (p={p_succ:.4f}); "
              f"median steps none={np.median(steps['none']):.1f} gated={np.median(steps['gated']):.1f} (p={p_steps:.4f}); "
              f"bits gated={bits['gated']} periodic={bits['periodic']} full={bits['full']}")
    report(capsys, 9, "communication benefit", ok, detail, time.perf_counter() - t0, 600)


def test_c10_bandwidth_robustness(capsys):
    t0 = time.perf_counter()
    cfgs = [EpisodeConfig(seed=s, comm_mode=m, bit_budget=b) for s in range(100) for m in ("gated", "full")
            for b in (4, 128)]
    rows = run_batch(cfgs)
    rate = {}
    for m in ("gated", "full"):
        for b in (4, 128):
            rate[m, b] = float(np.mean([r.success for r in rows if r.comm_mode == m and r.bit_budget == b]))
    drop = {m: (rate[m, 128] - rate[m, 4]) / rate[m, 128] for m in ("gated", "full")}
    ok = drop["gated"] < drop["full"]
    detail = (f"gated {rate['gated', 128]:.2f} -> {rate['gated', 4]:.2f} (drop {drop['gated']:.3f}); "
              f"full {rate['full', 128]:.2f} -> {rate['full', 4]:.2f} (drop {drop['full']:.3f})")
    report(capsys, 10, "bandwidth robustness", ok, detail, time.perf_counter() - t0, 600)


def test_c11_determinism(capsys):
    t0 = time.perf_counter()
    identical = True
    for seed, mode in ((0, "gated"), (1, "full"), (2, "periodic"), (3, "none")):
        cfg = EpisodeConfig(seed=seed, comm_mode=mode, drop_prob=0.2, partner_noise=1.0)
        identical &= run_episode(cfg).to_json().encode() == run_episode(cfg).to_json().encode()
    cfgs = [EpisodeConfig(seed=s, comm_mode=m, max_steps=300) for s in range(8) for m in ("none", "gated")]
    same_batch = run_batch(cfgs, jobs=1) == run_batch(cfgs, jobs=2)
    report(capsys, 11, "determinism", identical and same_batch,
           f"byte-identical logs {identical}, jobs=1 equals jobs=2 {same_batch}", time.perf_counter() - t0, 60)
