import math

import numpy as np
import pytest

from gridnav.coordination import (DEFAULT_GATE_WEIGHTS, GatingFeatures, PartnerEstimate, RegionalSummary, TokenBudget,
                                  classify_location, coordination_reward, curiosity_map, estimate_partner,
                                  exploration_reward, gate_decision, gating_features, goal_cell_in_region,
                                  intrinsic_reward, region_bounds, region_center, region_of, regional_curiosity,
                                  regional_summary, select_goal, sigmoid, tick_tokens)
from gridnav.errors import ExplorationComplete, InsufficientTokensError, InvalidInputError
from gridnav.world import BeliefMap, CellState


def set_free(b, cells):
    for c in cells:
        b.set(c, CellState.FREE, 1.0, 0)


def test_coordination_reward_examples():
    assert coordination_reward([5.0]) == pytest.approx(0.5)
    assert coordination_reward([2.0]) == 0.0
    assert coordination_reward([20.0]) == 1.0
    assert coordination_reward([3.0]) == pytest.approx(0.3)
    assert coordination_reward([PartnerEstimate(1, 5.0, (0, 5)), 20.0]) == pytest.approx(1.5)
    with pytest.raises(InvalidInputError):
        coordination_reward([-1.0])


def test_partner_estimate():
    e = estimate_partner(3, (0, 0), (3, 4))
    assert e.distance_cells == 5.0 and e.partner_id == 3
    noisy = estimate_partner(3, (0, 0), (3, 4), 1.0, np.random.default_rng(0))
    assert 4.0 <= noisy.distance_cells <= 6.0


def test_exploration_reward():
    assert exploration_reward([(5, 7)], (5, 5)) == pytest.approx(math.exp(-0.2))
    assert exploration_reward([(5, 8)], (5, 5)) == 0.0
    assert exploration_reward([(5, 5), (6, 6)], (5, 5)) == pytest.approx(1 + math.exp(-0.1 * math.sqrt(2)))


def test_intrinsic_reward():
    r = intrinsic_reward(1.0, 0.5, 1.0)
    assert r.composite == pytest.approx(1.55)
    assert r.as_dict()["coordination"] == 0.5
    with pytest.raises(InvalidInputError):
        intrinsic_reward(1, 1, 1, (1, 1))


def test_curiosity_two_unknown_neighbours():
    b = BeliefMap(5)
    set_free(b, [(r, c) for r in range(5) for c in range(5)])
    for c in [(1, 2), (2, 1)]:
        b.set(c, CellState.UNKNOWN, 0, -1)
    b.set((4, 4), CellState.UNKNOWN, 0, -1)
    raw = curiosity_map(b, (2, 2), decay=0.0)
    # (2,2) has two unknown neighbours -> 0.5 raw; the single-unknown cells score 0.25
    assert raw[2, 2] == 1.0
    assert raw[3, 4] == pytest.approx(0.5)
    assert raw[1, 1] == 1.0
    assert raw[0, 0] == 0.0


def test_curiosity_decays_with_distance():
    b = BeliefMap(9)
    set_free(b, [(r, c) for r in range(9) for c in range(9) if (r, c) not in [(0, 4), (8, 4)]])
    cur = curiosity_map(b, (1, 4))
    assert cur[1, 4] == 1.0
    assert cur[7, 4] == pytest.approx(math.exp(-0.6))
    assert np.all(curiosity_map(BeliefMap(4), (0, 0)) == 0)


def test_regions():
    assert len(region_bounds(29, 4)) == 16
    assert region_bounds(29, 4)[0] == (0, 8, 0, 8)
    assert region_bounds(29, 4)[15] == (24, 29, 24, 29)
    assert region_of((28, 0), 29, 4) == 12
    assert region_center(0, 29, 4) == (3.5, 3.5)
    cells = sum((r1 - r0) * (c1 - c0) for r0, r1, c0, c1 in region_bounds(29, 4))
    assert cells == 29 * 29


def test_regional_summary():
    b = BeliefMap(8)
    set_free(b, [(0, 0), (0, 1)])
    b.set((1, 0), CellState.WALL, 1.0, 0)
    s = regional_summary(b, [(7, 7)], g=4)
    assert s.features.shape == (48,)
    assert s.exploration_ratio[0] == 0.75
    assert s.walkability_ratio[0] == pytest.approx(2 / 3)
    assert s.agent_present[15] == 1 and s.agent_present.sum() == 1


def test_regional_curiosity_aggregation():
    cur = np.zeros((4, 4))
    cur[0, 0] = 1.0
    assert regional_curiosity(cur, 2, "max")[0] == 1.0
    assert regional_curiosity(cur, 2, "mean")[0] == 0.25
    with pytest.raises(InvalidInputError):
        regional_curiosity(cur, 2, "median")


def test_location_classes():
    b = BeliefMap(5)
    set_free(b, [(2, 1), (2, 2), (2, 3)])
    assert classify_location(b, (2, 2)) == "corridor"
    set_free(b, [(1, 2)])
    assert classify_location(b, (2, 2)) == "junction"
    assert classify_location(b, (2, 3)) == "deadend"
    c = BeliefMap(5)
    set_free(c, [(2, 2), (1, 1), (1, 3), (3, 1), (3, 3)])
    assert classify_location(c, (2, 2)) == "corridor"
    d = BeliefMap(5)
    set_free(d, [(2, 2), (1, 2), (2, 3)])
    assert classify_location(d, (2, 2)) == "junction"


def test_gate_decision_rules():
    f = GatingFeatures(0.5, 1.0, 0.5, 0.5, "corridor")
    assert f.vector.shape == (9,)
    assert gate_decision(f, np.zeros(9), True, True)
    assert not gate_decision(f, np.zeros(9), True, False)
    assert not gate_decision(f, np.zeros(9), False, True)
    assert not gate_decision(f, -np.ones(9), True, True)
    with pytest.raises(InvalidInputError):
        gate_decision(f, np.zeros(8), True, True)
    with pytest.raises(InvalidInputError):
        GatingFeatures(0, 0, 0, 0, "plaza")


def test_sigmoid_stable():
    assert sigmoid(0) == 0.5
    assert sigmoid(-1000) == 0.0 and sigmoid(1000) == 1.0


def test_gating_features():
    b = BeliefMap(8)
    set_free(b, [(3, 2), (3, 3), (3, 4)])
    f = gating_features((3, 3), b, TokenBudget(5.0))
    assert f.tokens_normalized == 0.5
    assert f.connectivity == 0.5
    assert f.location == "corridor"
    assert f.local_confidence == pytest.approx(3 / 9)
    assert f.exploration_progress == pytest.approx(3 / 64)
    assert len(DEFAULT_GATE_WEIGHTS) == 9


def test_token_arithmetic():
    b = TokenBudget(1.0)
    b = tick_tokens(b, True)
    assert b.current == pytest.approx(1 / 60)
    assert not b.available
    with pytest.raises(InsufficientTokensError):
        tick_tokens(b, True)
    b = TokenBudget(0.0)
    for _ in range(60):
        b = tick_tokens(b, False)
    assert b.current == pytest.approx(1.0)
    full = tick_tokens(TokenBudget(10.0), False)
    assert full.current == 10.0
    with pytest.raises(InvalidInputError):
        TokenBudget(11.0)


def test_token_refill_takes_sixty_steps():
    b = TokenBudget(0.0)
    steps = 0
    while b.current < 1.0 - 1e-9:
        b = tick_tokens(b, False)
        steps += 1
    assert steps == 60


def summary_with(expl, g=2):
    n = g * g
    return RegionalSummary(g, np.asarray(expl, float), np.zeros(n), np.zeros(n))


def test_select_goal_tie_breaks_low_index():
    choice = select_goal(summary_with([0.5] * 4), np.ones(4), [], 8)
    assert choice.region == 0


def test_select_goal_prefers_far_from_partner():
    assert select_goal(summary_with([0.5] * 4), np.ones(4), [(0, 0)], 28, d_norm=100.0).region == 3
    # separation saturates beyond d_norm, leaving a tie that goes to the lowest index
    assert select_goal(summary_with([0.5] * 4), np.ones(4), [(0, 0)], 28).region == 1


def test_select_goal_masks_explored_and_frontierless():
    choice = select_goal(summary_with([1.0, 0.5, 0.5, 0.5]), np.array([1.0, 0.0, 0.2, 0.1]), [], 8)
    assert choice.region == 2
    assert choice.scores[0] == -np.inf and choice.scores[1] == -np.inf
    with pytest.raises(ExplorationComplete):
        select_goal(summary_with([1.0] * 4), np.ones(4), [], 8)
    with pytest.raises(InvalidInputError):
        select_goal(summary_with([0.5] * 4), np.ones(4), [], 8, policy="nope")


def test_select_goal_target_override():
    assert select_goal(summary_with([1.0] * 4), np.zeros(4), [], 8, target_region=3).region == 3


def test_goal_cell_in_region():
    cur = np.zeros((8, 8))
    cur[5, 6] = 0.7
    cur[4, 7] = 0.7
    assert goal_cell_in_region(cur, 3, 2) == (4, 7)
