import math

import numpy as np
import pytest

from gridarena import entities as ent
from gridarena import worldgen
from gridarena.config import new_config, team_assignments
from gridarena.defaults import Subsystem
from gridarena.economy import Skill
from gridarena.entities import EntityKind, SpawnMode
from gridarena.errors import InsufficientSpawnCapacity
from gridarena.events import EventType
from gridarena.worldgen import FogClock

from .helpers import FakeState, grass_cfg, grass_map
from .oracles import idle_death_tick


def rng(seed=0):
    return np.random.default_rng(seed)


# --- spawning ----------------------------------------------------------------


def test_edge_scatter_distinct_edge_tiles():
    cfg = new_config("mini")
    tile_map = worldgen.generate_map(0, cfg)
    spawned = ent.spawn_players(SpawnMode.EDGE_SCATTER, None, tile_map, rng(), cfg)
    assert len(spawned) == 128
    positions = {e.pos for e in spawned.values()}
    assert len(positions) == 128
    ring = set(tile_map.edge_ring())
    assert positions <= ring


def test_team_tile_shares_one_tile_per_team():
    cfg = new_config("mini")
    teams = team_assignments(128, 8)
    tile_map = worldgen.generate_map(0, cfg)
    spawned = ent.spawn_players(SpawnMode.TEAM_TILE, teams, tile_map, rng(), cfg)
    tiles = {e.pos for e in spawned.values()}
    assert len(tiles) == 16
    for members in teams.values():
        assert len({spawned[m].pos for m in members}) == 1


def test_circle_spawn_angular_spacing():
    cfg = grass_cfg(64, PLAYER_N=64)
    teams = team_assignments(64, 8)  # 8 teams
    tile_map = grass_map(64, cfg)
    spawned = ent.spawn_players(SpawnMode.CIRCLE, teams, tile_map, rng(3), cfg)
    cr, cc = tile_map.center
    angles = sorted(
        math.atan2(spawned[members[0]].pos[0] - cr, spawned[members[0]].pos[1] - cc)
        for members in teams.values()
    )
    gaps = [angles[i + 1] - angles[i] for i in range(len(angles) - 1)]
    gaps.append(2 * math.pi + angles[0] - angles[-1])
    # one-tile quantization at radius 16 is about atan(1/16) ~ 0.0625 rad
    for gap in gaps:
        assert abs(gap - math.pi / 4) < 0.15


def test_spawn_immunity_set():
    cfg = new_config("mini")
    tile_map = worldgen.generate_map(0, cfg)
    spawned = ent.spawn_players(SpawnMode.EDGE_SCATTER, None, tile_map, rng(), cfg)
    assert all(e.immunity_until == 20 for e in spawned.values())


def test_spawn_capacity_error():
    cfg = grass_cfg(8, PLAYER_N=64)  # ring has 4*7=28 tiles < 64 agents
    tile_map = grass_map(8, cfg)
    with pytest.raises(InsufficientSpawnCapacity):
        ent.spawn_players(SpawnMode.EDGE_SCATTER, None, tile_map, rng(), cfg)


# --- movement ------------------------------------------------------------------


def make_agent(state, agent_id, pos):
    agent = ent.make_player(agent_id, pos, state.cfg)
    return state.add(agent)


def test_noop_move_keeps_position():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    agent = make_agent(state, 1, (12, 12))
    assert not ent.resolve_move(agent, ent.NOOP_MOVE, state.tile_map, cfg)
    assert agent.pos == (12, 12)


def test_move_into_stone_degrades_to_noop():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    state.tile_map.materials[11, 12] = worldgen.STONE
    agent = make_agent(state, 1, (12, 12))
    assert not ent.resolve_move(agent, 0, state.tile_map, cfg)  # N
    assert agent.pos == (12, 12)


def test_move_updates_occupancy():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    agent = make_agent(state, 1, (12, 12))
    assert ent.resolve_move(agent, 2, state.tile_map, cfg)  # E
    assert agent.pos == (12, 13)
    assert not state.tile_map.occupied((12, 12))
    assert state.tile_map.occupants[(12, 13)] == [1]


def test_two_agent_conflicts_never_colocate():
    # Exhaustive enumeration: two adjacent agents, all 25 move pairs, with
    # id-order sequencing and occupancy disallowed.
    for move_a in range(5):
        for move_b in range(5):
            cfg = grass_cfg()
            state = FakeState(cfg, grass_map(16, cfg))
            a = make_agent(state, 1, (12, 12))
            b = make_agent(state, 2, (12, 13))
            ent.resolve_move(a, move_a, state.tile_map, cfg)
            ent.resolve_move(b, move_b, state.tile_map, cfg)
            assert a.pos != b.pos, (move_a, move_b)
            # swap attempt specifically stays blocked
            if move_a == 2 and move_b == 3:
                assert a.pos == (12, 12) and b.pos == (12, 13)


def test_move_into_occupied_allowed_when_configured():
    cfg = grass_cfg()
    cfg.set_original("ALLOW_MOVE_INTO_OCCUPIED_TILE", True)
    state = FakeState(cfg, grass_map(16, cfg))
    a = make_agent(state, 1, (12, 12))
    make_agent(state, 2, (12, 13))
    assert ent.resolve_move(a, 2, state.tile_map, cfg)
    assert a.pos == (12, 13)


# --- metabolism -------------------------------------------------------------------


def test_metabolism_depletes_and_regens():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    agent = make_agent(state, 1, (12, 12))
    agent.health = 90
    ent.metabolism_tick(agent, state)
    assert agent.food == 99 and agent.water == 99
    assert agent.health == 92  # 2% of max health regen


def test_starvation_and_dehydration_stack():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    agent = make_agent(state, 1, (12, 12))
    agent.food = 0
    agent.water = 0
    ent.metabolism_tick(agent, state)
    assert agent.health == 80  # 10 + 10


def test_eating_from_foliage_tile():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    pos = (12, 12)
    state.tile_map.materials[pos] = worldgen.FOLIAGE
    state.tile_map.capacity[pos] = 1
    state.tile_map.harvests[pos] = 1
    agent = make_agent(state, 1, pos)
    agent.food = 10
    events = ent.metabolism_tick(agent, state)
    assert any(e.type is EventType.EAT_FOOD for e in events)
    assert agent.food == 59  # 10 + 50 restore - 1 depletion
    assert state.tile_map.harvests[pos] == 0


def test_drinking_adjacent_to_water():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    state.tile_map.materials[12, 13] = worldgen.WATER
    agent = make_agent(state, 1, (12, 12))
    agent.water = 10
    events = ent.metabolism_tick(agent, state)
    assert any(e.type is EventType.DRINK_WATER for e in events)
    assert agent.water == 59


def test_resilient_agent_takes_reduced_starvation():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    agent = make_agent(state, 1, (12, 12))
    agent.resilient = True
    agent.food = 0
    ent.metabolism_tick(agent, state)
    assert agent.health == 95  # 10 * (1 - 0.5) reduction


def test_idle_death_tick_matches_scalar_oracle():
    expected = idle_death_tick(100, 1, 10, 10, 100)
    assert expected == 105  # ceil(100/1) + ceil(100/20)
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    agent = make_agent(state, 1, (12, 12))
    died_at = None
    for tick in range(1, 200):
        state.tick = tick
        ent.metabolism_tick(agent, state)
        if agent.health <= 0:
            died_at = tick
            break
    assert died_at == expected


# --- combat --------------------------------------------------------------------------


def combat_pair(cfg=None):
    cfg = cfg or grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    attacker = make_agent(state, 1, (12, 12))
    defender = make_agent(state, 2, (12, 13))
    attacker.immunity_until = defender.immunity_until = 0
    return state, attacker, defender


def test_equal_style_base_damage():
    state, attacker, defender = combat_pair()
    assert ent.compute_damage(attacker, defender, Skill.MELEE, state.cfg) == 10


def test_super_effective_multiplier():
    state, attacker, defender = combat_pair()
    defender.active_style = Skill.RANGE  # melee beats range
    assert ent.compute_damage(attacker, defender, Skill.MELEE, state.cfg) == 15


def test_minimum_damage_floor():
    cfg = grass_cfg(profile="full")
    state, attacker, defender = combat_pair(cfg)
    for skill in Skill:
        defender.levels[skill] = 10  # huge defense via progression
    dmg = ent.compute_damage(attacker, defender, Skill.MELEE, cfg)
    assert dmg == math.ceil(0.05 * 10)
    assert dmg >= 1


def test_npc_damage_scaled_by_level_multiplier():
    state, _, defender = combat_pair()
    npc = ent.make_npc(-1, (12, 11), 3, EntityKind.AGGRESSIVE_NPC, state.cfg,
                       rng(), tick=0)
    npc.active_style = Skill.MELEE
    state.add(npc)
    # unscaled level-3 value: 10 + 2*3 = 16; multiplier 0.5 -> 8
    defender.active_style = Skill.MELEE
    assert ent.compute_damage(npc, defender, Skill.MELEE, state.cfg) == 8


def test_attack_out_of_reach_is_noop():
    state, attacker, defender = combat_pair()
    defender.pos = (12, 12 + 4)  # reach is 3
    assert ent.resolve_attack(attacker, defender, Skill.MELEE, state) == []
    assert defender.health == defender.max_health


def test_attack_respects_spawn_immunity():
    state, attacker, defender = combat_pair()
    defender.immunity_until = 20
    state.tick = 5
    assert ent.resolve_attack(attacker, defender, Skill.MELEE, state) == []
    state.tick = 20
    events = ent.resolve_attack(attacker, defender, Skill.MELEE, state)
    assert any(e.type is EventType.SCORE_HIT for e in events)


def test_inflexible_style_rejects_non_best():
    cfg = grass_cfg()
    cfg.set_original("COMBAT_ALLOW_FLEXIBLE_STYLE", False)
    state, attacker, defender = combat_pair(cfg)
    attacker.levels[Skill.RANGE] = 5  # best style is Range
    assert ent.resolve_attack(attacker, defender, Skill.MELEE, state) == []
    assert ent.resolve_attack(attacker, defender, Skill.RANGE, state) != []


def test_teammate_attack_blocked():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg), team_game=True)
    attacker = make_agent(state, 1, (12, 12))
    defender = make_agent(state, 2, (12, 13))
    attacker.team = defender.team = 4
    attacker.immunity_until = defender.immunity_until = 0
    assert ent.resolve_attack(attacker, defender, Skill.MELEE, state) == []


def test_kill_emits_events_and_awards_xp():
    cfg = grass_cfg(profile="full")
    state, attacker, defender = combat_pair(cfg)
    defender.health = 5
    defender.gold = 7
    events = ent.resolve_attack(attacker, defender, Skill.MELEE, state)
    types = [e.type for e in events]
    assert EventType.SCORE_HIT in types
    assert EventType.PLAYER_KILL in types
    assert EventType.EARN_GOLD in types
    assert EventType.AGENT_DEATH in types
    assert not defender.alive
    assert attacker.gold == cfg.effective("EXCHANGE_BASE_GOLD") + 7
    assert defender.gold == 0
    assert attacker.xp[Skill.MELEE] == 1


def test_combat_status_window():
    state, attacker, defender = combat_pair()
    state.tick = 10
    ent.resolve_attack(attacker, defender, Skill.MELEE, state)
    assert attacker.in_combat_until == 13
    assert defender.in_combat_until == 13
    assert defender.last_attacker == 1


# --- XP / levels ---------------------------------------------------------------------


def test_level_thresholds():
    cfg = new_config("full")
    assert ent.level_from_xp(0, cfg) == 1
    assert ent.level_from_xp(7, cfg) == 1
    assert ent.level_from_xp(8, cfg) == 2
    assert ent.level_from_xp(4087, cfg) == 9
    assert ent.level_from_xp(999_999, cfg) == 10


def test_levels_monotone_under_xp():
    cfg = new_config("full")
    agent = ent.make_player(1, (10, 10), cfg)
    last = 1
    for _ in range(200):
        agent.add_xp(Skill.MELEE, 5, cfg)
        level = agent.level(Skill.MELEE)
        assert level >= last
        last = level
    assert last == agent.level(Skill.MELEE) <= 10


def test_xp_ignored_when_progression_disabled():
    cfg = new_config("mini")  # no Progression subsystem
    agent = ent.make_player(1, (10, 10), cfg)
    agent.add_xp(Skill.MELEE, 1000, cfg)
    assert agent.level(Skill.MELEE) == 1


# --- NPCs ----------------------------------------------------------------------------


def test_npc_disposition_bands():
    cfg = new_config("mini")
    assert ent.npc_disposition(0.0, cfg) is EntityKind.AGGRESSIVE_NPC
    assert ent.npc_disposition(0.35, cfg) is EntityKind.AGGRESSIVE_NPC  # closed bound
    assert ent.npc_disposition(0.36, cfg) is EntityKind.NEUTRAL_NPC
    assert ent.npc_disposition(0.70, cfg) is EntityKind.NEUTRAL_NPC
    assert ent.npc_disposition(0.71, cfg) is EntityKind.PASSIVE_NPC
    assert ent.npc_disposition(1.0, cfg) is EntityKind.PASSIVE_NPC


def test_passive_npc_only_moves():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    npc = state.add(ent.make_npc(-1, (12, 12), 1, EntityKind.PASSIVE_NPC, cfg,
                                 rng(), 0))
    make_agent(state, 1, (12, 13))
    move, attack = ent.npc_decide(npc, state, rng(1))
    assert attack is None
    assert 0 <= move <= 4


def test_aggressive_npc_attacks_adjacent_player():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    npc = state.add(ent.make_npc(-1, (12, 12), 1, EntityKind.AGGRESSIVE_NPC, cfg,
                                 rng(), 0))
    player = make_agent(state, 1, (12, 13))
    player.immunity_until = 0
    move, attack = ent.npc_decide(npc, state, rng(1))
    assert attack is not None
    style, target = attack
    assert target == 1


def test_aggressive_npc_pursues_distant_player():
    cfg = grass_cfg(32)
    state = FakeState(cfg, grass_map(32, cfg))
    npc = state.add(ent.make_npc(-1, (15, 15), 1, EntityKind.AGGRESSIVE_NPC, cfg,
                                 rng(), 0))
    make_agent(state, 1, (15, 21))
    move, attack = ent.npc_decide(npc, state, rng(1))
    assert attack is None
    assert move == 2  # east, toward the player


def test_neutral_npc_retaliates_within_status_window():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    npc = state.add(ent.make_npc(-1, (12, 12), 1, EntityKind.NEUTRAL_NPC, cfg,
                                 rng(), 0))
    player = make_agent(state, 1, (12, 13))
    player.immunity_until = 0
    state.tick = 5
    ent.resolve_attack(player, npc, Skill.MELEE, state)
    move, attack = ent.npc_decide(npc, state, rng(1))
    assert attack == (npc.active_style, 1)
    state.tick = 20  # window expired
    move, attack = ent.npc_decide(npc, state, rng(1))
    assert attack is None


def test_npc_spawn_respects_cap():
    cfg = grass_cfg(32, NPC_N=4)
    state = FakeState(cfg, grass_map(32, cfg))
    for _ in range(10):
        for npc in ent.npc_spawn_tick(state, rng(7)):
            state.entities[npc.id] = npc
    living = [e for e in state.entities.values() if not e.is_player]
    assert len(living) == 4


def test_npc_population_fills_within_counting_bound():
    # NPC_N=64, attempts=8 per tick, empty all-grass map: full within 8 ticks.
    cfg = grass_cfg(64, NPC_N=64)
    state = FakeState(cfg, grass_map(64, cfg))
    generator = rng(3)
    ticks_needed = 0
    for tick in range(1, 20):
        state.tick = tick
        for npc in ent.npc_spawn_tick(state, generator):
            state.entities[npc.id] = npc
        if sum(1 for e in state.entities.values() if not e.is_player) >= 64:
            ticks_needed = tick
            break
    assert ticks_needed == math.ceil(64 / 8)


def test_npc_levels_in_configured_range():
    cfg = grass_cfg(32, NPC_LEVEL_MIN=2, NPC_LEVEL_MAX=5)
    state = FakeState(cfg, grass_map(32, cfg))
    generator = rng(11)
    for _ in range(30):
        for npc in ent.npc_spawn_tick(state, generator):
            state.entities[npc.id] = npc
    levels = {e.npc_level for e in state.entities.values() if not e.is_player}
    assert levels <= {2, 3, 4, 5}
    assert len(levels) > 1


# --- fog damage --------------------------------------------------------------------


def test_fog_damage_ceiling():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    state.fog_clock = FogClock(onset=0, speed=2.3, final_size=1)
    agent = make_agent(state, 1, (8, 8))  # edge tile, distance 0
    state.tick = 1
    ent.fog_damage_tick(state)
    assert agent.health == 100 - math.ceil(2.3)


def test_fog_damage_safe_zone():
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    state.fog_clock = FogClock(onset=0, speed=1.0, final_size=2)
    agent = make_agent(state, 1, state.tile_map.center)
    state.tick = 500
    ent.fog_damage_tick(state)
    assert agent.health == 100


def test_idle_edge_agent_fog_death_matches_oracle():
    expected = idle_death_tick(100, 1, 10, 10, 100, fog_onset=32, fog_speed=1.0)
    cfg = grass_cfg()
    state = FakeState(cfg, grass_map(16, cfg))
    state.fog_clock = FogClock(onset=32, speed=1.0, final_size=2)
    agent = make_agent(state, 1, (8, 8))
    died_at = None
    for tick in range(1, 300):
        state.tick = tick
        ent.metabolism_tick(agent, state)
        ent.fog_damage_tick(state)
        if agent.health <= 0:
            died_at = tick
            break
    assert died_at == expected
