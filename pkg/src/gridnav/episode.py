"""Multi-agent search episodes: observe, decide, move, communicate, fuse."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import coordination as co
from .config import EpisodeConfig
from .errors import ExplorationComplete
from .ib_comm import decode_map, encode_map
from .planner import ActionStep, astar, path_to_actions, turn_actions
from .world import (HEADING_VECTORS, AgentState, BeliefMap, CellState, MazeGrid, belief_to_occupancy,
                    fuse_belief, generate_maze, integrate_observation, map_iou, observe,
                    overlay_from_occupancy)


@dataclass
class EpisodeLog:
    config: dict
    maze: str
    steps: list = field(default_factory=list)
    success: bool = False
    steps_used: int = 0
    collisions: int = 0
    bits_tx: int = 0
    msgs: int = 0
    final_iou: float = 0.0
    extrinsic_total: float = 0.0
    snapshots: list = field(default_factory=list)  # (step, agent id, BeliefMap)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "maze": self.maze,
            "steps": self.steps,
            "outcome": {
                "success": self.success,
                "steps_used": self.steps_used,
                "collisions": self.collisions,
                "bits_tx": self.bits_tx,
                "msgs": self.msgs,
                "final_iou": self.final_iou,
                "extrinsic_total": self.extrinsic_total,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


class _Agent:
    __slots__ = ("state", "rng", "plan", "goal", "tokens", "partner_cells", "goal_curiosity", "goal_region")

    def __init__(self, state: AgentState, rng, tokens: co.TokenBudget):
        self.state = state
        self.rng = rng
        self.plan: list[ActionStep] = []
        self.goal = None
        self.goal_region = None
        self.goal_curiosity = 0.0
        self.tokens = tokens
        self.partner_cells: dict[int, tuple[int, int]] = {}  # last known partner positions


def _estimates(cfg: EpisodeConfig, me: _Agent, agents: list[_Agent]) -> list[co.PartnerEstimate]:
    """Partner distances from true positions, or from remembered ones in visibility mode."""
    out = []
    for other in agents:
        if other is me:
            continue
        pid = other.state.id
        cell = me.partner_cells.get(pid) if cfg.partner_visibility else other.state.cell
        if cell is not None:
            out.append(co.estimate_partner(pid, me.state.cell, cell, cfg.partner_noise, me.rng))
    return out


def _decide(cfg: EpisodeConfig, a: _Agent, partners: list[co.PartnerEstimate]) -> None:
    b = a.state.belief
    side = b.side
    target = b.target_cell()
    cur = co.curiosity_map(b, a.state.cell)
    if target is not None:
        goal = target
        a.goal_region = co.region_of(target, side, cfg.region_grid)
        a.goal_curiosity = 0.0
    else:
        summary = co.regional_summary(b, [a.state.cell], cfg.region_grid)
        reg = co.regional_curiosity(cur, cfg.region_grid, cfg.curiosity_aggregation)
        try:
            choice = co.select_goal(summary, reg, [p.position for p in partners], side, cfg.policy,
                                    weights=cfg.weights, d_norm=cfg.d_norm, d_min=cfg.d_min)
        except ExplorationComplete:
            a.goal, a.plan = None, [ActionStep.STAY]
            return
        a.goal_region = choice.region
        goal = co.goal_cell_in_region(cur, choice.region, cfg.region_grid)
        a.goal_curiosity = float(cur[goal])
    a.goal = goal
    if goal == a.state.cell:
        # standing on the frontier: face the nearest unknown neighbour
        r, c = goal
        for k in (0, 1, 3, 2):
            h = (a.state.heading + k) % 4
            dr, dc = HEADING_VECTORS[h]
            if 0 <= r + dr < side and 0 <= c + dc < side and not b.known[r + dr, c + dc]:
                a.plan = turn_actions(a.state.heading, h) or [ActionStep.STAY]
                return
        a.plan = [ActionStep.TURN_LEFT]
        return
    plan = astar(b, a.state.cell, goal, cfg.unknown_cost, cfg.trust_floor)
    a.plan = path_to_actions(plan.path, a.state.heading) if plan.found else [ActionStep.STAY]


def _apply(maze: MazeGrid, s: AgentState, action: ActionStep) -> bool:
    """Execute one action in place; True on collision."""
    if action is ActionStep.TURN_LEFT:
        s.heading = (s.heading + 1) % 4
    elif action is ActionStep.TURN_RIGHT:
        s.heading = (s.heading - 1) % 4
    elif action is ActionStep.MOVE_FORWARD:
        dr, dc = HEADING_VECTORS[s.heading]
        nxt = (s.cell[0] + dr, s.cell[1] + dc)
        if not maze.is_free(nxt):
            return True
        s.cell = nxt
    return False


def run_episode(cfg: EpisodeConfig, keep_snapshots: bool = False) -> EpisodeLog:
    maze = generate_maze(cfg.seed, cfg.maze_side, n_spawns=cfg.n_agents, loop_fraction=cfg.loop_fraction,
                         spawn_mode=cfg.spawn_mode)
    side = maze.side
    streams = np.random.SeedSequence(cfg.seed).spawn(cfg.n_agents + 1)
    comm_rng = np.random.default_rng(streams[-1])
    agents = []
    for i in range(cfg.n_agents):
        rng = np.random.default_rng(streams[i])
        st = AgentState(i, maze.spawn_cells[i], int(rng.integers(4)), BeliefMap(side), cfg.token_initial)
        agents.append(_Agent(st, rng, co.TokenBudget(cfg.token_initial, cfg.token_initial, cfg.token_refill)))
    log = EpisodeLog(cfg.to_dict(), maze.to_text())
    team = BeliefMap(side)
    obs_kw = dict(fov_degrees=cfg.fov_degrees, max_range=cfg.max_range)
    for a in agents:
        obs = observe(maze, a.state.cell, a.state.heading, **obs_kw)
        integrate_observation(a.state.belief, obs, 0)
        integrate_observation(team, obs, 0)
        # deployment positions are common knowledge
        a.partner_cells = {b.state.id: b.state.cell for b in agents if b is not a}
    if keep_snapshots:
        log.snapshots.extend((0, a.state.id, a.state.belief.copy()) for a in agents)

    ext_total = 0.0
    success = False
    t = 0
    for t in range(1, cfg.max_steps + 1):
        records = []
        for a in agents:
            s = a.state
            partners = _estimates(cfg, a, agents)
            target_known = s.belief.target_cell()
            if (t - 1) % cfg.K_interval == 0 or not a.plan or (target_known is not None and a.goal != target_known):
                _decide(cfg, a, partners)
            if cfg.replan_on_contradiction and a.plan[0] is ActionStep.MOVE_FORWARD:
                dr, dc = HEADING_VECTORS[s.heading]
                if s.belief.state[s.cell[0] + dr, s.cell[1] + dc] == CellState.WALL:
                    _decide(cfg, a, partners)
            action = a.plan.pop(0)
            collided = _apply(maze, s, action)
            if collided:
                a.plan = []
            team_known_before = team.known
            obs = observe(maze, s.cell, s.heading, **obs_kw)
            integrate_observation(s.belief, obs, t)
            integrate_observation(team, obs, t)
            seen = {o.cell for o in obs}
            for b in agents:
                if b is not a and b.state.cell in seen:
                    a.partner_cells[b.state.id] = b.state.cell
            fresh = [o.cell for o in obs if not team_known_before[o.cell]]
            r_explore = co.exploration_reward(fresh, s.cell, cfg.alpha, cfg.r_local)
            r_coord = co.coordination_reward(_estimates(cfg, a, agents), cfg.d_norm, cfg.d_min)
            intrinsic = co.intrinsic_reward(a.goal_curiosity, r_coord, r_explore, cfg.weights)
            reached = s.cell == maze.target_cell
            log.collisions += collided
            success = success or reached
            records.append({
                "id": s.id, "cell": list(s.cell), "heading": s.heading, "action": action.value,
                "collision": collided, "intrinsic": intrinsic.as_dict(),
            })
        n_coll = sum(r["collision"] for r in records)
        r_ext = cfg.reward_step + cfg.reward_collision * n_coll + (cfg.reward_success if success else 0.0)
        ext_total += r_ext

        messages, fusions = _communicate(cfg, t, agents, comm_rng)
        for a, rec in zip(agents, records):
            rec["tokens"] = a.tokens.current
            rec["iou"] = map_iou(a.state.belief, maze)
        log.bits_tx += sum(m["bits"] for m in messages)
        log.msgs += len(messages)
        log.steps.append({"t": t, "agents": records, "messages": messages, "fusions": fusions, "reward": r_ext,
                          "team_iou": map_iou(team, maze)})
        if keep_snapshots and cfg.log_interval and t % cfg.log_interval == 0:
            log.snapshots.extend((t, a.state.id, a.state.belief.copy()) for a in agents)
        if success:
            break

    log.success = success
    log.steps_used = t
    log.final_iou = map_iou(team, maze)
    log.extrinsic_total = ext_total
    if keep_snapshots and (not log.snapshots or log.snapshots[-1][0] != t):
        log.snapshots.extend((t, a.state.id, a.state.belief.copy()) for a in agents)
    return log


def _in_range(cfg: EpisodeConfig, a: _Agent, b: _Agent) -> bool:
    ca, cb = a.state.cell, b.state.cell
    return math.hypot(ca[0] - cb[0], ca[1] - cb[1]) <= cfg.d_comm


def _communicate(cfg: EpisodeConfig, t: int, agents: list[_Agent], rng) -> tuple[list, list]:
    """Decide transmissions on the current beliefs, then deliver and fuse."""
    outgoing = []
    for a in agents:
        s = a.state
        send = False
        if cfg.comm_mode == "full":
            send = True
        elif cfg.comm_mode == "periodic":
            send = t % cfg.periodic_interval == 0
        elif cfg.comm_mode == "gated":
            partner_near = any(_in_range(cfg, a, b) for b in agents if b is not a)
            if partner_near and a.tokens.available:
                f = co.gating_features(s.cell, s.belief, a.tokens, local_window=3)
                send = co.gate_decision(f, cfg.gate_weights, True, True)
            a.tokens = co.tick_tokens(a.tokens, send)
            s.tokens = a.tokens.current
        if send:
            msg = encode_map(belief_to_occupancy(s.belief, cfg.codec_unknown_value, cfg.codec_wall_value), cfg.bit_budget,
                             (s.cell[1], s.cell[0]), t)
            outgoing.append((a, msg))
    headers, fusions = [], []
    for a, msg in outgoing:
        h = msg.header()
        h["sender"] = a.state.id
        receivers = []
        for b in agents:
            if b is a or not _in_range(cfg, a, b):
                continue
            if cfg.drop_prob and rng.random() < cfg.drop_prob:
                continue
            overlay = overlay_from_occupancy(decode_map(msg, b.state.belief.side), 0, cfg.overlay_confidence)
            before = b.state.belief
            b.state.belief = fuse_belief(before, overlay)
            changed = int(np.count_nonzero(b.state.belief.state != before.state))
            b.partner_cells[a.state.id] = a.state.cell
            receivers.append(b.state.id)
            fusions.append({"sender": a.state.id, "receiver": b.state.id, "cells_changed": changed})
        h["receivers"] = receivers
        headers.append(h)
    return headers, fusions
