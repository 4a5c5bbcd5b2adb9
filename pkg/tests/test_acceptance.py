"""Acceptance suite: one test per gate, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the criterion
lines.  Tolerances are pinned here and nowhere else.
"""

import math

import numpy as np
import pytest
from scipy import stats

from gridarena import replay as replay_mod
from gridarena import tasks
from gridarena.arena import EpisodeJob, run_episode, run_jobs
from gridarena.bench import benchmark_pack
from gridarena.config import new_config
from gridarena.defaults import FULL_SUBSYSTEMS, Subsystem
from gridarena.elo import elo_ratings, pairwise_records
from gridarena.events import EventType, GameEvent
from gridarena.minigames import (
    GameHistory,
    MinigameKind,
    determine_difficulty,
    setup_episode,
    subsystems_for,
)
from gridarena.obs import ObservationLayout
from gridarena.policies import make_policy
from gridarena.tasks import ReplayMeta, TaskAssignment, evaluation_suite

from .oracles import bradley_terry_two_player_gap

K = MinigameKind
S = Subsystem


def ok(line: str) -> None:
    print(f"[acceptance PASS] {line}")


# --- 1. observation-size exactness -------------------------------------------


def test_observation_size_exactness():
    mini = ObservationLayout(new_config("mini"))
    full = ObservationLayout(new_config("full"))
    # independent arithmetic over the published component shapes
    mini_features = 1 + 1 + 27 + 225 * 7 + 100 * 31 + 32 * 4
    mini_masks = 5 + 3 + 101 + 127
    full_extra_features = 12 * 16 + 384 * 16
    full_extra_masks = 13 * 4 + 101 * 2 + 99 * 2 + 385
    assert mini_features == 4832
    assert mini_masks == 236
    assert full_extra_features == 192 + 6144
    assert full_extra_masks == 837
    assert mini.total == mini_features + mini_masks == 5068
    assert full.total == mini_features + mini_masks \
        + full_extra_features + full_extra_masks == 12241
    ok("observation sizes exact: mini=5068, full=12241 (4832+236; +192+6144+837)")


# --- 2. subsystem matrix ------------------------------------------------------


SUBSYSTEM_MATRIX = [
    (K.SURVIVAL, "full", set(FULL_SUBSYSTEMS)),
    (K.TEAM_BATTLE, "full", set(FULL_SUBSYSTEMS)),
    (K.MULTI_TASK, "full", set(FULL_SUBSYSTEMS)),
    (K.TEAM_BATTLE, "mini", {S.TERRAIN, S.RESOURCE, S.COMBAT, S.NPC, S.COMMUNICATION}),
    (K.PROTECT_THE_KING, "mini",
     {S.TERRAIN, S.RESOURCE, S.COMBAT, S.NPC, S.COMMUNICATION}),
    (K.RACE_TO_CENTER, "mini", {S.TERRAIN, S.RESOURCE}),
    (K.KING_OF_THE_HILL, "mini",
     {S.TERRAIN, S.RESOURCE, S.COMBAT, S.COMMUNICATION}),
    (K.SANDWICH, "mini", {S.TERRAIN, S.COMBAT, S.NPC, S.COMMUNICATION}),
]


def test_subsystem_matrix():
    for kind, profile, expected in SUBSYSTEM_MATRIX:
        assert subsystems_for(kind, profile) == expected, (kind, profile)
        cfg = new_config(profile)
        setup_episode(kind, cfg, GameHistory(), np.random.default_rng(0))
        assert set(cfg.enabled_subsystems) == expected, (kind, profile)
    ok("subsystem toggle matrix matches all eight experiment rows")


# --- 3. adaptive difficulty ----------------------------------------------------


def test_adaptive_difficulty_rule():
    cfg = new_config("mini")

    history = GameHistory()
    sizes = [determine_difficulty(K.RACE_TO_CENTER, history, cfg)["map_size"]]
    script = [True, False, True, True, False, True]
    for won in script:
        history.record(won, {"map_size": history.map_size})
        sizes.append(determine_difficulty(K.RACE_TO_CENTER, history, cfg)["map_size"])
    # step only after a win at the current size, guarded by the last result
    assert sizes == [40, 48, 48, 56, 64, 64, 72]
    assert all(b >= a for a, b in zip(sizes, sizes[1:]))

    history = GameHistory()
    holds = [determine_difficulty(K.KING_OF_THE_HILL, history, cfg)["hold_duration"]]
    for _ in range(40):
        history.record(True, {"hold_duration": history.hold_duration})
        holds.append(determine_difficulty(K.KING_OF_THE_HILL, history,
                                          cfg)["hold_duration"])
    assert holds[0] == 10 and holds[-1] == 200
    assert all(b >= a for a, b in zip(holds, holds[1:]))

    history = GameHistory()
    history.record(False, {"map_size": 40})
    assert determine_difficulty(K.RACE_TO_CENTER, history, cfg)["map_size"] == 40
    ok("adaptive difficulty: race 40->128 stepping, KoH 10->200, monotone, "
       "loss-guarded")


# --- 4. domain randomization ------------------------------------------------------


def test_domain_randomization():
    cfg = new_config("mini")
    history = GameHistory()
    rng = np.random.default_rng(123)
    onsets, denominators, npcs = [], [], []
    for _ in range(2000):
        setup_episode(K.SURVIVAL, cfg, history, rng)
        onsets.append(cfg.effective("DEATH_FOG_ONSET"))
        denominators.append(round(1 / cfg.effective("DEATH_FOG_SPEED")))
        npcs.append(cfg.effective("NPC_N"))
    assert min(onsets) >= 32 and max(onsets) < 256
    assert set(denominators) == {7, 8, 9, 10, 11}
    assert min(npcs) >= 64 and max(npcs) < 256

    onset_counts, _ = np.histogram(onsets, bins=16, range=(32, 256))
    npc_counts, _ = np.histogram(npcs, bins=16, range=(64, 256))
    denom_counts = [denominators.count(d) for d in (7, 8, 9, 10, 11)]
    p_onset = stats.chisquare(onset_counts).pvalue
    p_npc = stats.chisquare(npc_counts).pvalue
    p_denom = stats.chisquare(denom_counts).pvalue
    assert p_onset > 0.01 and p_npc > 0.01 and p_denom > 0.01
    ok(f"domain randomization uniform: chi-square p onset={p_onset:.3f} "
       f"npc={p_npc:.3f} speed={p_denom:.3f}")


# --- 5. Elo oracle ------------------------------------------------------------------


def test_elo_oracle():
    table = []
    table += [{"a": 1.0, "b": 0.0}] * 150
    table += [{"a": 0.0, "b": 1.0}] * 50
    ratings = elo_ratings(pairwise_records(table))
    expected = bradley_terry_two_player_gap(150, 50)
    assert expected == pytest.approx(400 * math.log10(3), abs=1e-9)
    gap = ratings.gap("a", "b")
    assert gap == pytest.approx(expected, abs=0.01)

    draws = pairwise_records([{"a": 0.5, "b": 0.5}] * 200)
    uniform = elo_ratings(draws)
    assert uniform.ratings["a"] == pytest.approx(1000.0, abs=1e-6)
    assert uniform.ratings["b"] == pytest.approx(1000.0, abs=1e-6)
    ok(f"Elo oracle: 75/25 gap {gap:.2f} = 400*log10(3) +- 0.01; "
       "all-draws anchor at 1000")


# --- 6. determinism --------------------------------------------------------------


def _determinism_jobs():
    jobs = []
    for kind in K:
        profile = "full" if kind is K.MULTI_TASK else "mini"
        originals = ("PLAYER_N=32", "MAP_CENTER=48", "HORIZON=96")
        for seed in range(20):
            jobs.append(EpisodeJob(kind.value, ("random_valid",), seed * 7 + 1,
                                   profile=profile, originals=originals))
    return jobs


def test_determinism_across_runs_and_workers():
    jobs = _determinism_jobs()
    first = [digest for _, digest in run_jobs(jobs, workers=1)]
    second = [digest for _, digest in run_jobs(jobs, workers=1)]
    parallel = [digest for _, digest in run_jobs(jobs, workers=4)]
    assert first == second == parallel
    assert all(d is not None for d in first)
    ok(f"determinism: {len(jobs)} episodes x2 serial runs + 4-worker run give "
       "byte-identical replay digests")


# --- 7. task-progress telescoping ----------------------------------------------------


def test_task_progress_telescoping():
    checked = 0
    for i in range(100):
        kind = (K.SURVIVAL, K.MULTI_TASK, K.RACE_TO_CENTER)[i % 3]
        profile = "full" if kind is K.MULTI_TASK else "mini"
        cfg = new_config(profile)
        cfg.set_original("PLAYER_N", 16)
        cfg.set_original("MAP_CENTER", 48)
        cfg.set_original("HORIZON", 48)
        result, _ = run_episode(kind, [make_policy("random_valid")], 1000 + i,
                                cfg, collect_replay=False)
        for agent_id, (canonical, _cat, max_progress) in result.agent_tasks.items():
            assert result.agent_own_rewards[agent_id] == pytest.approx(
                max_progress, abs=1e-9), (kind, agent_id, canonical)
            checked += 1
    ok(f"telescoping: per-agent summed rewards equal final max progress "
       f"for {checked} agents over 100 episodes (<=1e-9)")


# --- 8. behavioral sanity ---------------------------------------------------------------


def test_behavioral_forager_beats_random():
    wins = 0
    for seed in range(100):
        cfg = new_config("mini")
        cfg.set_original("PLAYER_N", 8)
        cfg.set_original("MAP_CENTER", 40)
        cfg.set_original("HORIZON", 1024)
        cfg.set_original("TERRAIN_SCATTER_EXTRA_RESOURCES", False)
        result, _ = run_episode(
            K.SURVIVAL, [make_policy("forager"), make_policy("random_valid")],
            seed, cfg, post_overrides={"DEATH_FOG_ONSET": None, "NPC_N": 0},
            collect_replay=False)
        by = {}
        for agent_id, name in result.policy_of.items():
            by.setdefault(name, []).append(result.agent_lifespans[agent_id])
        if np.mean(by["forager"]) > np.mean(by["random_valid"]):
            wins += 1
    assert wins >= 80
    ok(f"forager outlives random_valid in {wins}/100 paired "
       "no-combat survival episodes (>=80)")


def test_behavioral_brawler_elo():
    scores = []
    for seed in range(200):
        cfg = new_config("mini")
        cfg.set_original("PLAYER_N", 32)
        cfg.set_original("MAP_CENTER", 48)
        cfg.set_original("HORIZON", 384)
        result, _ = run_episode(
            K.TEAM_BATTLE, [make_policy("brawler"), make_policy("random_valid")],
            seed, cfg,
            post_overrides={"COMBAT_SPAWN_IMMUNITY": 0, "NPC_N": 16},
            collect_replay=False)
        scores.append(result.policy_scores)
    table = elo_ratings(pairwise_records(scores))
    gap = table.gap("brawler", "random_valid")
    assert gap >= 100
    ok(f"brawler Elo exceeds random_valid by {gap:.1f} over a 200-episode "
       "team-battle tournament (>=100)")


def test_behavioral_racer_wins():
    wins = 0
    history = GameHistory(adaptive=False)
    for seed in range(100):
        cfg = new_config("mini")
        cfg.set_original("PLAYER_N", 8)
        cfg.set_original("HORIZON", 1024)
        result, _ = run_episode(
            K.RACE_TO_CENTER, [make_policy("racer"), make_policy("random_valid")],
            seed, cfg, history=history, collect_replay=False)
        if result.winner and result.policy_of.get(result.winner[1]) == "racer":
            wins += 1
    assert wins >= 95
    ok(f"racer wins {wins}/100 center races against random_valid (>=95)")


# --- 9. relative throughput ------------------------------------------------------------


def test_relative_throughput():
    mini = benchmark_pack("mini")
    full = benchmark_pack("full")
    assert mini.agent_steps > 0 and full.agent_steps > 0
    ratio = mini.throughput / full.throughput
    print(f"  mini pack: {mini.throughput:,.0f} agent-steps/s")
    print(f"  full pack: {full.throughput:,.0f} agent-steps/s")
    assert ratio > 2.0
    ok(f"mini-profile throughput {ratio:.2f}x the full profile (>2x); "
       f"absolute figures reported above")


# --- 10. multi-task scoring -----------------------------------------------------------


def test_multitask_normalized_score_hand_trace():
    cfg = new_config("full")
    agent = 1
    suite = evaluation_suite()
    assignments = [TaskAssignment(spec, agent, "agent") for spec in suite]

    events = []
    tick = 1

    def emit(etype, **kw):
        nonlocal tick
        events.append(GameEvent(tick, agent, etype, **kw))
        tick += 1

    for _ in range(5):
        emit(EventType.PLAYER_KILL, target=99)
    for level in (1, 1, 1, 1, 3, 3):
        emit(EventType.DEFEAT_NPC, target=-5, level=level)
    for _ in range(10):
        emit(EventType.EARN_GOLD, gold=10)
    for _ in range(2):
        emit(EventType.BUY_ITEM, item=0, level=1, gold=6)
    emit(EventType.EQUIP_ITEM, item=0, level=1, quantity=1)  # hat
    for _ in range(7):
        emit(EventType.HARVEST_ITEM, item=11, level=1, quantity=1)  # whetstone
    for _ in range(3):
        emit(EventType.CONSUME_ITEM, item=14, level=1, quantity=1)  # ration
    for _ in range(30):
        emit(EventType.SCORE_HIT, target=99, style=0, damage=10)
    emit(EventType.SEIZE_TILE, row=80, col=80, distance=3)
    for d in range(1, 13):
        emit(EventType.GO_FARTHEST, distance=d, row=50, col=50 + d)

    meta = ReplayMeta(final_tick=512, playable=128, center=(71, 71),
                      spawn_tick={agent: 0})
    progress = tasks.progress_from_log(assignments, events, meta, cfg)
    per_task = dict(zip(suite, progress))
    score = tasks.normalized_score(per_task)

    # Hand-computed expectation, category by category.
    survival = 512 / 1024
    combat = (5 / 20 + 6 / 20 + 2 / 20) / 3
    exploration = (12 / 64 + (1 - 3 / 128) * 0.99) / 2
    # 30 melee hits -> xp 30, thresholds (0, 8, 24, 56, ...) -> level 3
    skill = ((3 - 1) / 9 + 0 * 7) / 8
    # 44 item tasks: whetstone lvl1 7/20; ration lvl1 3/20; equip hat lvl1 = 1;
    # fully-armed melee/mage/range tier1 = 1 equipped piece each = 0.25
    item = (7 / 20 + 3 / 20 + 1.0 + 0.25 * 3) / 44
    # gold peaks at 10 base + 100 earned = 110 before the two purchases
    market = (10 / 20 + 2 / 20 + 1.0 + 1.0 + (100 - 12) / 100) / 5
    expected = (100 / 6) * (survival + combat + exploration + skill + item + market)
    assert score == pytest.approx(expected, abs=1e-9)
    ok(f"63-task normalized score on hand-built trace = {score:.6f}, "
       "matching the hand-computed 100/6 weighting exactly")
