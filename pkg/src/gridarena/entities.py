"""Entity lifecycle: spawning, movement, metabolism, combat, and NPC behavior.

Functions that need world context take a ``state`` object duck-typed from
``engine.WorldState`` (cfg, tick, tile_map, drops, team_of, ...), which keeps
them unit-testable against a lightweight stand-in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import economy, worldgen
from .config import GameConfig
from .defaults import Subsystem
from .economy import Item, Skill
from .errors import InsufficientSpawnCapacity
from .events import EventType, GameEvent

STYLES = (Skill.MELEE, Skill.RANGE, Skill.MAGE)
# Attacker beats the next style in the cycle Melee -> Range -> Mage -> Melee.
BEATS = {Skill.MELEE: Skill.RANGE, Skill.RANGE: Skill.MAGE, Skill.MAGE: Skill.MELEE}

SKILL_ORDER = tuple(Skill)
SKILL_INDEX = {skill: i for i, skill in enumerate(SKILL_ORDER)}

# Move action order: N, S, E, W, noop (noop is the sentinel last index).
DIRECTIONS = ((-1, 0), (1, 0), (0, 1), (0, -1), (0, 0))
NOOP_MOVE = 4


class EntityKind(Enum):
    PLAYER = 1
    PASSIVE_NPC = 2
    NEUTRAL_NPC = 3
    AGGRESSIVE_NPC = 4


NPC_KINDS = (EntityKind.PASSIVE_NPC, EntityKind.NEUTRAL_NPC, EntityKind.AGGRESSIVE_NPC)


class SpawnMode(Enum):
    EDGE_SCATTER = "edge_scatter"
    TEAM_TILE = "team_tile"
    CIRCLE = "circle"


def chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


@dataclass(slots=True)
class Entity:
    id: int
    kind: EntityKind
    pos: tuple[int, int]
    spawn_pos: tuple[int, int]
    spawn_tick: int
    max_health: int
    health: int
    max_resource: int
    food: int
    water: int
    team: int | None = None
    gold: int = 0
    immunity_until: int = 0
    in_combat_until: int = 0
    last_attacker: int = 0
    alive: bool = True
    death_tick: int | None = None
    latest_token: int = 0
    active_style: Skill = Skill.MELEE
    npc_level: int = 0
    resilient: bool = False
    max_displacement: int = 0
    damage_taken_last_tick: int = 0
    xp: dict = field(default_factory=dict)
    levels: dict = field(default_factory=dict)
    inventory: list = field(default_factory=list)
    # Skill levels/xp as plain lists in SKILL_ORDER, mirrored from the dicts;
    # the observation hot path indexes these to avoid enum hashing.
    level_row: list = field(default_factory=lambda: [1] * len(SKILL_ORDER))
    xp_row: list = field(default_factory=lambda: [0] * len(SKILL_ORDER))
    is_player: bool = True

    def __post_init__(self):
        self.is_player = self.kind is EntityKind.PLAYER

    def level(self, skill: Skill) -> int:
        return self.levels.get(skill, 1)

    def add_xp(self, skill: Skill, amount: int, cfg: GameConfig) -> None:
        if amount <= 0 or not cfg.enabled(Subsystem.PROGRESSION):
            return
        xp = self.xp.get(skill, 0) + amount
        self.xp[skill] = xp
        level = level_from_xp(xp, cfg)
        self.levels[skill] = level
        idx = SKILL_INDEX[skill]
        self.level_row[idx] = level
        self.xp_row[idx] = xp

    def best_style(self) -> Skill:
        return max(STYLES, key=lambda s: (self.level(s), -STYLES.index(s)))

    def time_alive(self, tick: int) -> int:
        end = self.death_tick if self.death_tick is not None else tick
        return max(0, end - self.spawn_tick)


def level_from_xp(xp: int, cfg: GameConfig) -> int:
    thresholds = cfg.effective("PROGRESSION_EXP_THRESHOLD")
    base = cfg.effective("PROGRESSION_BASE_LEVEL")
    level = base
    for i, needed in enumerate(thresholds, start=1):
        if xp >= needed:
            level = max(level, i)
    return min(level, cfg.effective("PROGRESSION_LEVEL_MAX"))


def make_player(agent_id: int, pos: tuple[int, int], cfg: GameConfig,
                tick: int = 0, team: int | None = None) -> Entity:
    base_hp = cfg.effective("PLAYER_BASE_HEALTH")
    base_res = cfg.effective("RESOURCE_BASE")
    immunity = tick + cfg.effective("COMBAT_SPAWN_IMMUNITY") \
        if cfg.enabled(Subsystem.COMBAT) else 0
    gold = cfg.effective("EXCHANGE_BASE_GOLD") if cfg.enabled(Subsystem.EXCHANGE) else 0
    entity = Entity(
        id=agent_id, kind=EntityKind.PLAYER, pos=pos, spawn_pos=pos,
        spawn_tick=tick, max_health=base_hp, health=base_hp,
        max_resource=base_res, food=base_res, water=base_res,
        team=team, gold=gold, immunity_until=immunity,
    )
    base_level = cfg.effective("PROGRESSION_BASE_LEVEL")
    for skill in Skill:
        entity.levels[skill] = base_level
        entity.xp[skill] = 0
    entity.level_row = [base_level] * len(SKILL_ORDER)
    return entity


def _place(tile_map: worldgen.TileMap, entity: Entity) -> None:
    tile_map.occupants.setdefault(entity.pos, []).append(entity.id)
    tile_map.occupants[entity.pos].sort()


def remove_from_tile(tile_map: worldgen.TileMap, entity: Entity) -> None:
    stack = tile_map.occupants.get(entity.pos)
    if stack and entity.id in stack:
        stack.remove(entity.id)
        if not stack:
            del tile_map.occupants[entity.pos]


def nearest_passable(tile_map: worldgen.TileMap, pos: tuple[int, int]) -> tuple[int, int]:
    """Closest passable playable tile, scanning rings in a fixed order."""
    for radius in range(tile_map.playable):
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if max(abs(dr), abs(dc)) != radius:
                    continue
                cand = (pos[0] + dr, pos[1] + dc)
                if 0 <= cand[0] < tile_map.side and 0 <= cand[1] < tile_map.side \
                        and tile_map.in_playable(cand) and tile_map.passable(cand):
                    return cand
    raise InsufficientSpawnCapacity("no passable tile on map")


def spawn_players(mode: SpawnMode, teams: dict[int, list[int]] | None,
                  tile_map: worldgen.TileMap, rng: np.random.Generator,
                  cfg: GameConfig, tick: int = 0) -> dict[int, Entity]:
    """Spawn the player population in one of the three placement modes.

    EdgeScatter gives each agent its own edge tile; TeamTile stacks a team on
    a shared edge tile; Circle spaces teams equally on a ring between center
    and edge.  Team spawns may stack regardless of the occupancy rule.
    """
    if teams is None:
        agent_ids = list(range(1, cfg.effective("PLAYER_N") + 1))
        team_of = {a: None for a in agent_ids}
        groups = [[a] for a in agent_ids]
    else:
        groups = [list(teams[t]) for t in sorted(teams)]
        team_of = {a: t for t in teams for a in teams[t]}
        agent_ids = [a for g in groups for a in g]

    ring = tile_map.edge_ring()
    entities: dict[int, Entity] = {}

    if mode is SpawnMode.EDGE_SCATTER:
        n = len(agent_ids)
        if n > len(ring):
            raise InsufficientSpawnCapacity(f"{n} agents > {len(ring)} edge tiles")
        offset = int(rng.integers(len(ring)))
        for i, agent_id in enumerate(sorted(agent_ids)):
            pos = ring[(offset + (i * len(ring)) // n) % len(ring)]
            entities[agent_id] = make_player(agent_id, pos, cfg, tick,
                                             team_of[agent_id])
    elif mode is SpawnMode.TEAM_TILE:
        count = len(groups)
        if count > len(ring):
            raise InsufficientSpawnCapacity(f"{count} teams > {len(ring)} edge tiles")
        offset = int(rng.integers(len(ring)))
        for i, group in enumerate(groups):
            pos = ring[(offset + (i * len(ring)) // count) % len(ring)]
            for agent_id in group:
                entities[agent_id] = make_player(agent_id, pos, cfg, tick,
                                                 team_of[agent_id])
    elif mode is SpawnMode.CIRCLE:
        count = len(groups)
        radius = max(2, tile_map.playable // 4)
        cr, cc = tile_map.center
        rotation = float(rng.uniform(0, 2 * math.pi))
        for i, group in enumerate(groups):
            angle = rotation + 2 * math.pi * i / count
            cand = (cr + round(radius * math.sin(angle)),
                    cc + round(radius * math.cos(angle)))
            pos = nearest_passable(tile_map, cand)
            for agent_id in group:
                entities[agent_id] = make_player(agent_id, pos, cfg, tick,
                                                 team_of[agent_id])
    else:  # pragma: no cover
        raise ValueError(mode)

    if cfg.enabled(Subsystem.RESOURCE):
        resilient_n = int(cfg.effective("RESOURCE_RESILIENT_POPULATION") * len(agent_ids))
        for agent_id in sorted(agent_ids)[:resilient_n]:
            entities[agent_id].resilient = True
    for entity in entities.values():
        _place(tile_map, entity)
    return entities


# --- movement ---------------------------------------------------------------


def resolve_move(entity: Entity, direction: int, tile_map: worldgen.TileMap,
                 cfg: GameConfig, passable=None) -> bool:
    """Apply one move; illegal moves degrade to noop.  Returns whether moved.

    ``passable`` is the optional static passability grid; occupancy is
    always re-checked live so sequential conflicts resolve correctly.
    """
    if direction == NOOP_MOVE:
        return False
    dr, dc = DIRECTIONS[direction]
    target = (entity.pos[0] + dr, entity.pos[1] + dc)
    if passable is not None:
        if not passable[target]:
            return False
    elif not tile_map.in_playable(target) or not tile_map.passable(target):
        return False
    if tile_map.occupants.get(target) \
            and not cfg.effective("ALLOW_MOVE_INTO_OCCUPIED_TILE"):
        return False
    remove_from_tile(tile_map, entity)
    entity.pos = target
    _place(tile_map, entity)
    return True


def legal_moves(entity: Entity, tile_map: worldgen.TileMap, cfg: GameConfig) -> list[int]:
    """Indices into DIRECTIONS that would not degrade to noop (noop included)."""
    allow = cfg.effective("ALLOW_MOVE_INTO_OCCUPIED_TILE")
    out = []
    for i, (dr, dc) in enumerate(DIRECTIONS[:4]):
        target = (entity.pos[0] + dr, entity.pos[1] + dc)
        if tile_map.in_playable(target) and tile_map.passable(target) \
                and (allow or not tile_map.occupied(target)):
            out.append(i)
    out.append(NOOP_MOVE)
    return out


def passable_grid(tile_map: worldgen.TileMap) -> np.ndarray:
    """Static land-passability; border and out-of-playable stay False."""
    grid = np.isin(tile_map.materials, tuple(worldgen.PASSABLE))
    grid &= tile_map.dist_edge >= 0
    return grid


def free_move_grid(tile_map: worldgen.TileMap, passable: np.ndarray,
                   allow_occupied: bool) -> np.ndarray:
    """Per-tick enterable-tile grid: passable minus current occupancy."""
    if allow_occupied:
        return passable
    free = passable.copy()
    for pos, stack in tile_map.occupants.items():
        if stack:
            free[pos] = False
    return free


def move_options_batch(rows: np.ndarray, cols: np.ndarray,
                       free: np.ndarray) -> np.ndarray:
    """(N, 4) legality of N/S/E/W steps, gathered from the free grid."""
    dr = np.asarray([d[0] for d in DIRECTIONS[:4]])
    dc = np.asarray([d[1] for d in DIRECTIONS[:4]])
    return free[rows[:, None] + dr[None, :], cols[:, None] + dc[None, :]]


# --- metabolism ---------------------------------------------------------------


def water_adjacency(tile_map: worldgen.TileMap) -> np.ndarray:
    """Tiles within Chebyshev distance 1 of drinkable water; static per map."""
    wet = (tile_map.materials == worldgen.WATER) \
        | (tile_map.materials == worldgen.FISH)
    near = wet.copy()
    near[1:, :] |= wet[:-1, :]
    near[:-1, :] |= wet[1:, :]
    near[:, 1:] |= wet[:, :-1]
    near[:, :-1] |= wet[:, 1:]
    near[1:, 1:] |= wet[:-1, :-1]
    near[1:, :-1] |= wet[:-1, 1:]
    near[:-1, 1:] |= wet[1:, :-1]
    near[:-1, :-1] |= wet[1:, 1:]
    return near


def metabolism_tick(entity: Entity, state) -> list[GameEvent]:
    """Per-tick food/water depletion, harvesting, and health regen.

    Order: harvest/drink, starvation damage for gauges already at zero, gauge
    depletion, then regen when both gauges clear the threshold.
    """
    cfg: GameConfig = state.cfg
    tile_map: worldgen.TileMap = state.tile_map
    tick: int = state.tick
    out: list[GameEvent] = []
    base = entity.max_resource
    restore = int(round(cfg.effective("RESOURCE_HARVEST_RESTORE_FRACTION") * base))

    pos = entity.pos
    if entity.food < base and int(tile_map.materials[pos]) == worldgen.FOLIAGE \
            and tile_map.harvests[pos] > 0:
        tile_map.harvests[pos] -= 1
        entity.food = min(base, entity.food + restore)
        out.append(GameEvent(tick, entity.id, EventType.EAT_FOOD,
                             row=pos[0], col=pos[1]))
    if entity.water < base:
        near = getattr(state, "water_adjacent", None)
        if near is None:
            near = water_adjacency(tile_map)
        if near[pos]:
            entity.water = min(base, entity.water + restore)
            out.append(GameEvent(tick, entity.id, EventType.DRINK_WATER,
                                 row=pos[0], col=pos[1]))

    reduction = cfg.effective("RESOURCE_DAMAGE_REDUCTION") if entity.resilient else 0.0
    if entity.food == 0:
        dmg = int(round(cfg.effective("RESOURCE_STARVATION_RATE") * (1 - reduction)))
        entity.health -= dmg
        entity.damage_taken_last_tick += dmg
    if entity.water == 0:
        dmg = int(round(cfg.effective("RESOURCE_DEHYDRATION_RATE") * (1 - reduction)))
        entity.health -= dmg
        entity.damage_taken_last_tick += dmg

    rate = cfg.effective("RESOURCE_DEPLETION_RATE")
    entity.food = max(0, entity.food - rate)
    entity.water = max(0, entity.water - rate)

    threshold = cfg.effective("RESOURCE_HEALTH_REGEN_THRESHOLD") * base
    if entity.food >= threshold and entity.water >= threshold and entity.health > 0:
        heal = int(round(cfg.effective("RESOURCE_HEALTH_RESTORE_FRACTION")
                         * entity.max_health))
        heal += cfg.effective("PLAYER_HEALTH_INCREMENT")
        entity.health = min(entity.max_health, entity.health + heal)
    return out


# --- combat -------------------------------------------------------------------


def style_reach(style: Skill, cfg: GameConfig) -> int:
    return cfg.effective(f"COMBAT_{style.value.upper()}_REACH")


def compute_damage(attacker: Entity, defender: Entity, style: Skill,
                   cfg: GameConfig) -> int:
    """Offense minus defense with the minimum-damage floor."""
    if attacker.is_player:
        if cfg.enabled(Subsystem.PROGRESSION):
            base = cfg.effective(f"PROGRESSION_{style.value.upper()}_BASE_DAMAGE")
            per = cfg.effective(f"PROGRESSION_{style.value.upper()}_LEVEL_DAMAGE")
            lvl = attacker.level(style) - cfg.effective("PROGRESSION_BASE_LEVEL")
            offense = float(base + per * lvl)
        else:
            offense = float(cfg.effective(f"COMBAT_{style.value.upper()}_DAMAGE"))
        if cfg.enabled(Subsystem.EQUIPMENT):
            offense += economy.equipment_stats(attacker, cfg, style)[0]
    else:
        mult = cfg.effective("NPC_LEVEL_MULTIPLIER")
        offense = math.floor(mult * (cfg.effective("NPC_BASE_DAMAGE")
                                     + cfg.effective("NPC_LEVEL_DAMAGE")
                                     * attacker.npc_level))
        offense = float(offense)
    if BEATS[style] is defender.active_style:
        offense *= cfg.effective("COMBAT_WEAKNESS_MULTIPLIER")

    if defender.is_player:
        defense = 0
        if cfg.enabled(Subsystem.PROGRESSION):
            defense = cfg.effective("PROGRESSION_BASE_DEFENSE") \
                + cfg.effective("PROGRESSION_LEVEL_DEFENSE") \
                * (defender.level(defender.best_style())
                   - cfg.effective("PROGRESSION_BASE_LEVEL"))
        if cfg.enabled(Subsystem.EQUIPMENT):
            defense += economy.equipment_stats(defender, cfg)[1]
    else:
        mult = cfg.effective("NPC_LEVEL_MULTIPLIER")
        defense = math.floor(mult * (cfg.effective("NPC_BASE_DEFENSE")
                                     + cfg.effective("NPC_LEVEL_DEFENSE")
                                     * defender.npc_level))

    floor_dmg = math.ceil(cfg.effective("COMBAT_MINIMUM_DAMAGE_PROPORTION") * offense)
    return max(int(math.floor(offense)) - int(defense), floor_dmg)


def attack_allowed(attacker: Entity, target: Entity, style: Skill, state) -> bool:
    """Reach, immunity, style, and team checks; mirrors the action mask."""
    cfg: GameConfig = state.cfg
    if not attacker.alive or not target.alive or attacker.id == target.id:
        return False
    if chebyshev(attacker.pos, target.pos) > style_reach(style, cfg):
        return False
    if state.tick < target.immunity_until:
        return False
    if not cfg.effective("COMBAT_ALLOW_FLEXIBLE_STYLE") \
            and style is not attacker.best_style():
        return False
    if state.is_team_game and attacker.team is not None \
            and attacker.team == target.team:
        return False
    if not attacker.is_player and not target.is_player \
            and not cfg.effective("NPC_ALLOW_ATTACK_OTHER_NPCS"):
        return False
    return True


def resolve_attack(attacker: Entity, target: Entity, style: Skill, state) -> list[GameEvent]:
    """Apply one attack; out-of-contract attacks are silent no-ops."""
    if not attack_allowed(attacker, target, style, state):
        return []
    cfg: GameConfig = state.cfg
    tick: int = state.tick
    out: list[GameEvent] = []

    dmg = compute_damage(attacker, target, style, cfg)
    target.health -= dmg
    target.damage_taken_last_tick += dmg
    target.last_attacker = attacker.id
    duration = cfg.effective("COMBAT_STATUS_DURATION")
    attacker.in_combat_until = tick + duration
    target.in_combat_until = tick + duration
    attacker.active_style = style
    out.append(GameEvent(tick, attacker.id, EventType.SCORE_HIT, target=target.id,
                         style=STYLES.index(style), damage=dmg))
    if attacker.is_player:
        attacker.add_xp(style, cfg.effective("PROGRESSION_COMBAT_XP_SCALE"), cfg)
        if cfg.enabled(Subsystem.EQUIPMENT):
            ammo = economy.equipped_in_slot(attacker, "ammo")
            if ammo is not None and economy.AMMO_STYLE[ammo.type] is style:
                ammo.quantity -= 1
                out.append(GameEvent(tick, attacker.id, EventType.FIRE_AMMO,
                                     item=ammo.type.value, level=ammo.level,
                                     quantity=1))
                if ammo.quantity <= 0:
                    out.append(GameEvent(tick, attacker.id, EventType.EQUIP_ITEM,
                                         item=ammo.type.value, level=ammo.level,
                                         quantity=0))
                    attacker.inventory.remove(ammo)
    if target.health <= 0:
        out.extend(kill_entity(target, state, killer=attacker))
    return out


def kill_entity(victim: Entity, state, killer: Entity | None = None) -> list[GameEvent]:
    """Mark dead, emit kill/death events, transfer gold, drop inventory."""
    if not victim.alive:
        return []
    cfg: GameConfig = state.cfg
    tick: int = state.tick
    out: list[GameEvent] = []
    victim.alive = False
    victim.health = max(0, victim.health)
    victim.death_tick = tick
    remove_from_tile(state.tile_map, victim)

    if killer is not None:
        if victim.is_player:
            out.append(GameEvent(tick, killer.id, EventType.PLAYER_KILL,
                                 target=victim.id, gold=victim.gold or None))
        else:
            out.append(GameEvent(tick, killer.id, EventType.DEFEAT_NPC,
                                 target=victim.id, level=victim.npc_level))
        if cfg.enabled(Subsystem.EXCHANGE) and victim.gold > 0 and killer.is_player:
            killer.gold += victim.gold
            out.append(GameEvent(tick, killer.id, EventType.EARN_GOLD,
                                 gold=victim.gold, target=victim.id))
            victim.gold = 0
    if cfg.enabled(Subsystem.ITEM) and victim.inventory:
        pile = state.drops.setdefault(victim.pos, [])
        for item in victim.inventory:
            if item.equipped:
                out.append(GameEvent(tick, victim.id, EventType.EQUIP_ITEM,
                                     item=item.type.value, level=item.level,
                                     quantity=0))
            item.equipped = False
            if item.listed_price is None:
                pile.append((tick, item))
        victim.inventory = []
    out.append(GameEvent(tick, victim.id, EventType.AGENT_DEATH,
                         target=killer.id if killer else None))
    return out


# --- NPCs ---------------------------------------------------------------------


def npc_disposition(frac_from_center: float, cfg: GameConfig) -> EntityKind:
    """Spawn-position disposition; aggressive band is closed at its bound."""
    if frac_from_center <= cfg.effective("NPC_SPAWN_AGGRESSIVE"):
        return EntityKind.AGGRESSIVE_NPC
    if frac_from_center <= cfg.effective("NPC_SPAWN_NEUTRAL"):
        return EntityKind.NEUTRAL_NPC
    return EntityKind.PASSIVE_NPC


def make_npc(npc_id: int, pos: tuple[int, int], level: int, kind: EntityKind,
             cfg: GameConfig, rng: np.random.Generator, tick: int) -> Entity:
    base_hp = cfg.effective("PLAYER_BASE_HEALTH")
    entity = Entity(
        id=npc_id, kind=kind, pos=pos, spawn_pos=pos, spawn_tick=tick,
        max_health=base_hp, health=base_hp,
        max_resource=cfg.effective("RESOURCE_BASE"),
        food=cfg.effective("RESOURCE_BASE"), water=cfg.effective("RESOURCE_BASE"),
        npc_level=level, active_style=STYLES[int(rng.integers(3))],
    )
    for skill in STYLES:
        entity.levels[skill] = level
        entity.level_row[SKILL_INDEX[skill]] = level
    # Full profile: NPCs carry level-scaled gear and gold so kills feed the
    # economy; hostility decides how much they bring.
    if cfg.enabled(Subsystem.EXCHANGE):
        entity.gold = level
    if cfg.enabled(Subsystem.ITEM):
        item_level = economy.harvest_item_level(level)
        carried = []
        if kind is not EntityKind.PASSIVE_NPC:
            carried.append(economy.STYLE_WEAPON[entity.active_style])
        if kind is EntityKind.AGGRESSIVE_NPC:
            carried += [economy.ItemType.HAT, economy.ItemType.TOP,
                        economy.ItemType.BOTTOM]
        for item_type in carried:
            entity.inventory.append(
                economy.Item(item_type, level=item_level, equipped=True))
    return entity


def npc_spawn_tick(state, rng: np.random.Generator,
                   spawn_region: str = "anywhere") -> list[Entity]:
    """Attempt NPC placements onto free passable tiles up to the population cap."""
    cfg: GameConfig = state.cfg
    tile_map: worldgen.TileMap = state.tile_map
    living = sum(1 for e in state.entities.values()
                 if e.alive and not e.is_player)
    cap = cfg.effective("NPC_N")
    if not cfg.effective("NPC_DEFAULT_REFILL_DEAD_NPCS"):
        cap -= state.npcs_dead
    room = cap - living
    if room <= 0:
        return []

    b, n = tile_map.border, tile_map.playable
    cr, cc = tile_map.center
    max_center = max(int(tile_map.dist_center[b:b + n, b:b + n].max()), 1)
    ring = tile_map.edge_ring()
    spawned: list[Entity] = []
    for _ in range(min(cfg.effective("NPC_SPAWN_ATTEMPTS"), room)):
        pos = None
        for _ in range(16):
            if spawn_region == "edge_ring":
                cand = ring[int(rng.integers(len(ring)))]
            elif spawn_region == "center":
                cand = (cr + int(rng.integers(-3, 4)), cc + int(rng.integers(-3, 4)))
            else:
                cand = (b + int(rng.integers(n)), b + int(rng.integers(n)))
            if tile_map.in_playable(cand) and tile_map.passable(cand) \
                    and not tile_map.occupied(cand):
                pos = cand
                break
        if pos is None:
            continue
        level = int(rng.integers(cfg.effective("NPC_LEVEL_MIN"),
                                 cfg.effective("NPC_LEVEL_MAX") + 1))
        frac = tile_map.dist_center[pos] / max_center
        kind = npc_disposition(float(frac), cfg)
        npc = make_npc(state.next_npc_id, pos, level, kind, cfg, rng, state.tick)
        state.next_npc_id -= 1
        _place(tile_map, npc)
        spawned.append(npc)
    return spawned


def _step_toward(entity: Entity, target_pos: tuple[int, int],
                 tile_map: worldgen.TileMap, cfg: GameConfig) -> int:
    """Greedy move index that reduces Chebyshev distance, else noop."""
    best = NOOP_MOVE
    best_d = chebyshev(entity.pos, target_pos)
    allow = cfg.effective("ALLOW_MOVE_INTO_OCCUPIED_TILE")
    for i, (dr, dc) in enumerate(DIRECTIONS[:4]):
        cand = (entity.pos[0] + dr, entity.pos[1] + dc)
        if not tile_map.in_playable(cand) or not tile_map.passable(cand):
            continue
        if tile_map.occupied(cand) and not allow:
            continue
        d = chebyshev(cand, target_pos)
        if d < best_d:
            best, best_d = i, d
    return best


def _player_cache(state):
    players = [e for e in state.entities.values() if e.alive and e.is_player]
    players.sort(key=lambda e: e.id)
    rows = np.asarray([p.pos[0] for p in players], dtype=np.int64)
    cols = np.asarray([p.pos[1] for p in players], dtype=np.int64)
    return players, rows, cols


def npc_decide(npc: Entity, state, rng: np.random.Generator, player_cache=None,
               wander_draw=None):
    """Scripted NPC behavior: (move index, optional (style, target id)).

    ``wander_draw`` is (legal move option list, pre-drawn unit float) supplied
    by the batched caller; standalone calls consume the generator directly.
    """
    cfg: GameConfig = state.cfg
    tile_map: worldgen.TileMap = state.tile_map
    vision = cfg.effective("PLAYER_VISION_RADIUS")

    def wander() -> int:
        if wander_draw is not None:
            options, unit = wander_draw
            return int(options[int(unit * len(options))])
        options = legal_moves(npc, tile_map, cfg)
        return int(options[int(rng.integers(len(options)))])

    def try_attack(target: Entity):
        style = npc.active_style
        if chebyshev(npc.pos, target.pos) <= style_reach(style, cfg) \
                and state.tick >= target.immunity_until:
            return (style, target.id)
        return None

    if npc.kind is EntityKind.PASSIVE_NPC:
        return wander(), None

    if npc.kind is EntityKind.NEUTRAL_NPC:
        if state.tick < npc.in_combat_until and npc.last_attacker:
            attacker = state.entities.get(npc.last_attacker)
            if attacker is not None and attacker.alive \
                    and chebyshev(npc.pos, attacker.pos) <= vision:
                attack = try_attack(attacker)
                if attack:
                    return NOOP_MOVE, attack
                return _step_toward(npc, attacker.pos, tile_map, cfg), None
        return wander(), None

    # Aggressive: pursue the nearest visible player (ties to the lowest id).
    players, rows, cols = player_cache if player_cache is not None \
        else _player_cache(state)
    if not players:
        return wander(), None
    d = np.maximum(np.abs(rows - npc.pos[0]), np.abs(cols - npc.pos[1]))
    idx = int(np.argmin(d))  # players sorted by id, argmin takes the first
    if d[idx] > vision:
        return wander(), None
    nearest = players[idx]
    attack = try_attack(nearest)
    if attack:
        return NOOP_MOVE, attack
    return _step_toward(npc, nearest.pos, tile_map, cfg), None


# All 16 possible N/S/E/W legality patterns -> wander option lists.
_WANDER_OPTIONS = [
    [d for d in range(4) if pattern & (8 >> d)] + [NOOP_MOVE]
    for pattern in range(16)
]


def npc_decide_all(state, rng: np.random.Generator) -> dict[int, tuple]:
    """Decide every living NPC in ascending-id order with shared caches.

    Wander randomness is drawn as one batch (one unit float per NPC) so the
    stream depends only on the NPC count, not on which NPCs wander.
    """
    npc_ids = sorted(e.id for e in state.entities.values()
                     if e.alive and not e.is_player)
    if not npc_ids:
        return {}
    cache = _player_cache(state)
    cfg = state.cfg
    passable = getattr(state, "passable_static", None)
    if passable is None:
        passable = passable_grid(state.tile_map)
    free = free_move_grid(state.tile_map, passable,
                          cfg.effective("ALLOW_MOVE_INTO_OCCUPIED_TILE"))
    npcs = [state.entities[i] for i in npc_ids]
    ok = move_options_batch(np.asarray([e.pos[0] for e in npcs]),
                            np.asarray([e.pos[1] for e in npcs]), free)
    patterns = (ok @ np.asarray([8, 4, 2, 1])).tolist()
    units = rng.random(len(npc_ids)).tolist()
    tick = state.tick
    plans: dict[int, tuple] = {}
    for i, npc_id in enumerate(npc_ids):
        npc = npcs[i]
        options = _WANDER_OPTIONS[patterns[i]]
        # Fast path: pure wanderers skip the full decision tree.
        if npc.kind is EntityKind.PASSIVE_NPC or (
                npc.kind is EntityKind.NEUTRAL_NPC
                and (tick >= npc.in_combat_until or not npc.last_attacker)):
            plans[npc_id] = (options[int(units[i] * len(options))], None)
            continue
        plans[npc_id] = npc_decide(npc, state, rng, cache,
                                   wander_draw=(options, units[i]))
    return plans


# --- fog ---------------------------------------------------------------------


def fog_damage_tick(state) -> list[GameEvent]:
    """ceil(depth) HP per tick to every living entity inside the fog."""
    clock = state.fog_clock
    if clock.onset is None or state.tick < clock.onset:
        return []
    depth_grid = worldgen.fog_depth_grid(state.tick, clock, state.tile_map)
    for entity in state.entities.values():
        if not entity.alive:
            continue
        depth = depth_grid[entity.pos]
        if depth > 0:
            dmg = math.ceil(depth)
            entity.health -= dmg
            entity.damage_taken_last_tick += dmg
    return []
