"""Attribute schema and shipped default values for every configurable knob.

This is the single source of truth for defaults: tests, the engine, and the
config file round-trip all read from this table.  Values marked "engine
default" are fixed here rather than derived from any external source.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Subsystem(Enum):
    """Toggleable bundle of game mechanics plus its obs/action surface."""

    TERRAIN = "Terrain"
    RESOURCE = "Resource"
    COMBAT = "Combat"
    NPC = "NPC"
    COMMUNICATION = "Communication"
    ITEM = "Item"
    EQUIPMENT = "Equipment"
    PROFESSION = "Profession"
    PROGRESSION = "Progression"
    EXCHANGE = "Exchange"


# Subsystems enabled by each profile.
MINI_SUBSYSTEMS = frozenset(
    {
        Subsystem.TERRAIN,
        Subsystem.RESOURCE,
        Subsystem.COMBAT,
        Subsystem.NPC,
        Subsystem.COMMUNICATION,
    }
)
FULL_SUBSYSTEMS = MINI_SUBSYSTEMS | frozenset(
    {
        Subsystem.ITEM,
        Subsystem.EQUIPMENT,
        Subsystem.PROFESSION,
        Subsystem.PROGRESSION,
        Subsystem.EXCHANGE,
    }
)

# Dependency closure between subsystems (A requires all of B).
SUBSYSTEM_REQUIRES: dict[Subsystem, frozenset[Subsystem]] = {
    Subsystem.RESOURCE: frozenset({Subsystem.TERRAIN}),
    Subsystem.NPC: frozenset({Subsystem.COMBAT}),
    Subsystem.EQUIPMENT: frozenset({Subsystem.ITEM}),
    Subsystem.PROFESSION: frozenset({Subsystem.ITEM, Subsystem.TERRAIN}),
    Subsystem.EXCHANGE: frozenset({Subsystem.ITEM}),
}


@dataclass(frozen=True)
class AttributeSpec:
    """Typed schema entry for one config attribute.

    kind is one of: int, float, bool, opt_int, pair (2-tuple of reals),
    int_tuple, str, teams (int players-per-team or explicit mapping).
    bounds, when set, is an inclusive (lo, hi) range; hi may be None for
    "no upper bound".
    """

    section: Subsystem | None  # None = base attribute
    kind: str
    default: object
    bounds: tuple | None = None


_B = None  # base section marker, purely for table readability

SCHEMA: dict[str, AttributeSpec] = {
    # --- Base -------------------------------------------------------------
    "HORIZON": AttributeSpec(_B, "int", 1024, (1, None)),
    "ALLOW_MOVE_INTO_OCCUPIED_TILE": AttributeSpec(_B, "bool", False),
    "PLAYER_N": AttributeSpec(_B, "int", 128, (1, None)),
    "PLAYER_VISION_RADIUS": AttributeSpec(_B, "int", 7, (1, None)),
    "PLAYER_BASE_HEALTH": AttributeSpec(_B, "int", 100, (1, None)),
    "PLAYER_HEALTH_INCREMENT": AttributeSpec(_B, "int", 0, (0, None)),
    "DEATH_FOG_ONSET": AttributeSpec(_B, "opt_int", None, (0, None)),
    "DEATH_FOG_SPEED": AttributeSpec(_B, "float", 1.0, (0.0, None)),
    "DEATH_FOG_FINAL_SIZE": AttributeSpec(_B, "int", 8, (0, None)),
    "MAP_CENTER": AttributeSpec(_B, "int", 128, (4, None)),
    "MAP_N": AttributeSpec(_B, "int", 256, (1, None)),
    "MAP_RESET_FROM_FRACTAL": AttributeSpec(_B, "bool", True),
    "TEAMS": AttributeSpec(_B, "teams", 8),
    "TASK_EMBED_DIM": AttributeSpec(_B, "int", 16, (1, None)),
    "PROVIDE_ACTION_TARGETS": AttributeSpec(_B, "bool", True),
    "PROVIDE_NOOP_ACTION_TARGET": AttributeSpec(_B, "bool", True),
    "PROVIDE_DEATH_FOG_OBS": AttributeSpec(_B, "bool", True),
    "GAME_PACKS": AttributeSpec(_B, "str", ""),
    # --- Terrain ----------------------------------------------------------
    "TERRAIN_FLIP_SEED": AttributeSpec(Subsystem.TERRAIN, "bool", False),
    "TERRAIN_FREQUENCY": AttributeSpec(Subsystem.TERRAIN, "pair", (-3.0, -6.0)),
    "TERRAIN_FREQUENCY_OFFSET": AttributeSpec(Subsystem.TERRAIN, "float", 7.0),
    "TERRAIN_LOG_INTERPOLATE_MIN": AttributeSpec(Subsystem.TERRAIN, "float", -2.0),
    "TERRAIN_LOG_INTERPOLATE_MAX": AttributeSpec(Subsystem.TERRAIN, "float", 0.0),
    "TERRAIN_TILES_PER_OCTAVE": AttributeSpec(Subsystem.TERRAIN, "int", 8, (1, None)),
    "TERRAIN_VOID": AttributeSpec(Subsystem.TERRAIN, "float", 0.0, (0.0, 1.0)),
    "TERRAIN_WATER": AttributeSpec(Subsystem.TERRAIN, "float", 0.25, (0.0, 1.0)),
    "TERRAIN_GRASS": AttributeSpec(Subsystem.TERRAIN, "float", 0.55, (0.0, 1.0)),
    "TERRAIN_FOILAGE": AttributeSpec(Subsystem.TERRAIN, "float", 0.65, (0.0, 1.0)),
    "TERRAIN_RESET_TO_GRASS": AttributeSpec(Subsystem.TERRAIN, "bool", False),
    "TERRAIN_DISABLE_STONE": AttributeSpec(Subsystem.TERRAIN, "bool", False),
    "TERRAIN_SCATTER_EXTRA_RESOURCES": AttributeSpec(Subsystem.TERRAIN, "bool", True),
    # --- Resource ---------------------------------------------------------
    "RESOURCE_BASE": AttributeSpec(Subsystem.RESOURCE, "int", 100, (1, None)),
    "RESOURCE_DEPLETION_RATE": AttributeSpec(Subsystem.RESOURCE, "int", 1, (0, None)),
    "RESOURCE_STARVATION_RATE": AttributeSpec(Subsystem.RESOURCE, "int", 10, (0, None)),
    "RESOURCE_DEHYDRATION_RATE": AttributeSpec(Subsystem.RESOURCE, "int", 10, (0, None)),
    "RESOURCE_RESILIENT_POPULATION": AttributeSpec(
        Subsystem.RESOURCE, "float", 0.0, (0.0, 1.0)
    ),
    "RESOURCE_DAMAGE_REDUCTION": AttributeSpec(
        Subsystem.RESOURCE, "float", 0.5, (0.0, 1.0)
    ),
    "RESOURCE_FOILAGE_CAPACITY": AttributeSpec(Subsystem.RESOURCE, "int", 1, (1, None)),
    "RESOURCE_FOILAGE_RESPAWN": AttributeSpec(
        Subsystem.RESOURCE, "float", 0.025, (0.0, 1.0)
    ),
    "RESOURCE_HARVEST_RESTORE_FRACTION": AttributeSpec(
        Subsystem.RESOURCE, "float", 0.5, (0.0, 1.0)
    ),
    "RESOURCE_HEALTH_REGEN_THRESHOLD": AttributeSpec(
        Subsystem.RESOURCE, "float", 0.5, (0.0, 1.0)
    ),
    "RESOURCE_HEALTH_RESTORE_FRACTION": AttributeSpec(
        Subsystem.RESOURCE, "float", 0.02, (0.0, 1.0)
    ),
    # --- Combat -----------------------------------------------------------
    "COMBAT_SPAWN_IMMUNITY": AttributeSpec(Subsystem.COMBAT, "int", 20, (0, None)),
    "COMBAT_ALLOW_FLEXIBLE_STYLE": AttributeSpec(Subsystem.COMBAT, "bool", True),
    "COMBAT_STATUS_DURATION": AttributeSpec(Subsystem.COMBAT, "int", 3, (0, None)),
    "COMBAT_WEAKNESS_MULTIPLIER": AttributeSpec(
        Subsystem.COMBAT, "float", 1.5, (1.0, None)
    ),
    "COMBAT_MINIMUM_DAMAGE_PROPORTION": AttributeSpec(
        Subsystem.COMBAT, "float", 0.05, (0.0, 1.0)
    ),
    "COMBAT_DAMAGE_FORMULA": AttributeSpec(Subsystem.COMBAT, "str", "standard"),
    "COMBAT_MELEE_DAMAGE": AttributeSpec(Subsystem.COMBAT, "int", 10, (0, None)),
    "COMBAT_MELEE_REACH": AttributeSpec(Subsystem.COMBAT, "int", 3, (1, None)),
    "COMBAT_RANGE_DAMAGE": AttributeSpec(Subsystem.COMBAT, "int", 10, (0, None)),
    "COMBAT_RANGE_REACH": AttributeSpec(Subsystem.COMBAT, "int", 3, (1, None)),
    "COMBAT_MAGE_DAMAGE": AttributeSpec(Subsystem.COMBAT, "int", 10, (0, None)),
    "COMBAT_MAGE_REACH": AttributeSpec(Subsystem.COMBAT, "int", 3, (1, None)),
    # --- NPC ----------------------------------------------------------------
    "NPC_N": AttributeSpec(Subsystem.NPC, "int", 128, (0, None)),
    "NPC_DEFAULT_REFILL_DEAD_NPCS": AttributeSpec(Subsystem.NPC, "bool", True),
    "NPC_SPAWN_ATTEMPTS": AttributeSpec(Subsystem.NPC, "int", 8, (1, None)),
    "NPC_SPAWN_AGGRESSIVE": AttributeSpec(Subsystem.NPC, "float", 0.35, (0.0, 1.0)),
    "NPC_SPAWN_NEUTRAL": AttributeSpec(Subsystem.NPC, "float", 0.70, (0.0, 1.0)),
    "NPC_SPAWN_PASSIVE": AttributeSpec(Subsystem.NPC, "float", 1.0, (0.0, 1.0)),
    "NPC_LEVEL_MIN": AttributeSpec(Subsystem.NPC, "int", 1, (1, None)),
    "NPC_LEVEL_MAX": AttributeSpec(Subsystem.NPC, "int", 10, (1, None)),
    "NPC_BASE_DEFENSE": AttributeSpec(Subsystem.NPC, "int", 0, (0, None)),
    "NPC_LEVEL_DEFENSE": AttributeSpec(Subsystem.NPC, "int", 2, (0, None)),
    "NPC_BASE_DAMAGE": AttributeSpec(Subsystem.NPC, "int", 10, (0, None)),
    "NPC_LEVEL_DAMAGE": AttributeSpec(Subsystem.NPC, "int", 2, (0, None)),
    "NPC_LEVEL_MULTIPLIER": AttributeSpec(Subsystem.NPC, "float", 0.5, (0.0, None)),
    "NPC_ALLOW_ATTACK_OTHER_NPCS": AttributeSpec(Subsystem.NPC, "bool", False),
    # --- Communication ------------------------------------------------------
    "COMMUNICATION_N_OBS": AttributeSpec(Subsystem.COMMUNICATION, "int", 32, (1, None)),
    "COMMUNICATION_NUM_TOKENS": AttributeSpec(
        Subsystem.COMMUNICATION, "int", 127, (1, None)
    ),
    # --- Item ---------------------------------------------------------------
    "ITEM_N": AttributeSpec(Subsystem.ITEM, "int", 16, (1, None)),
    "ITEM_INVENTORY_CAPACITY": AttributeSpec(Subsystem.ITEM, "int", 12, (1, None)),
    "ITEM_ALLOW_GIFT": AttributeSpec(Subsystem.ITEM, "bool", True),
    "INVENTORY_N_OBS": AttributeSpec(Subsystem.ITEM, "int", 12, (1, None)),
    # --- Equipment ------------------------------------------------------------
    "WEAPON_DROP_PROB": AttributeSpec(Subsystem.EQUIPMENT, "float", 0.025, (0.0, 1.0)),
    "EQUIPMENT_WEAPON_BASE_DAMAGE": AttributeSpec(Subsystem.EQUIPMENT, "int", 5, (0, None)),
    "EQUIPMENT_WEAPON_LEVEL_DAMAGE": AttributeSpec(Subsystem.EQUIPMENT, "int", 3, (0, None)),
    "EQUIPMENT_AMMUNITION_BASE_DAMAGE": AttributeSpec(Subsystem.EQUIPMENT, "int", 1, (0, None)),
    "EQUIPMENT_AMMUNITION_LEVEL_DAMAGE": AttributeSpec(Subsystem.EQUIPMENT, "int", 1, (0, None)),
    "EQUIPMENT_TOOL_BASE_DEFENSE": AttributeSpec(Subsystem.EQUIPMENT, "int", 2, (0, None)),
    "EQUIPMENT_TOOL_LEVEL_DEFENSE": AttributeSpec(Subsystem.EQUIPMENT, "int", 1, (0, None)),
    "EQUIPMENT_ARMOR_BASE_DEFENSE": AttributeSpec(Subsystem.EQUIPMENT, "int", 2, (0, None)),
    "EQUIPMENT_ARMOR_LEVEL_DEFENSE": AttributeSpec(Subsystem.EQUIPMENT, "int", 1, (0, None)),
    # --- Profession -------------------------------------------------------------
    "PROFESSION_TREE_CAPACITY": AttributeSpec(Subsystem.PROFESSION, "int", 1, (1, None)),
    "PROFESSION_TREE_RESPAWN": AttributeSpec(Subsystem.PROFESSION, "float", 0.10, (0.0, 1.0)),
    "PROFESSION_ORE_CAPACITY": AttributeSpec(Subsystem.PROFESSION, "int", 1, (1, None)),
    "PROFESSION_ORE_RESPAWN": AttributeSpec(Subsystem.PROFESSION, "float", 0.10, (0.0, 1.0)),
    "PROFESSION_CRYSTAL_CAPACITY": AttributeSpec(Subsystem.PROFESSION, "int", 1, (1, None)),
    "PROFESSION_CRYSTAL_RESPAWN": AttributeSpec(Subsystem.PROFESSION, "float", 0.10, (0.0, 1.0)),
    "PROFESSION_HERB_CAPACITY": AttributeSpec(Subsystem.PROFESSION, "int", 1, (1, None)),
    "PROFESSION_HERB_RESPAWN": AttributeSpec(Subsystem.PROFESSION, "float", 0.10, (0.0, 1.0)),
    "PROFESSION_FISH_CAPACITY": AttributeSpec(Subsystem.PROFESSION, "int", 1, (1, None)),
    "PROFESSION_FISH_RESPAWN": AttributeSpec(Subsystem.PROFESSION, "float", 0.10, (0.0, 1.0)),
    "PROFESSION_CONSUMABLE_RESTORE": AttributeSpec(Subsystem.PROFESSION, "int", 50, (0, None)),
    # --- Progression ----------------------------------------------------------------
    "PROGRESSION_BASE_LEVEL": AttributeSpec(Subsystem.PROGRESSION, "int", 1, (1, None)),
    "PROGRESSION_LEVEL_MAX": AttributeSpec(Subsystem.PROGRESSION, "int", 10, (1, None)),
    "PROGRESSION_EXP_THRESHOLD": AttributeSpec(
        Subsystem.PROGRESSION,
        "int_tuple",
        (0, 8, 24, 56, 120, 248, 504, 1016, 2040, 4088),
    ),
    "PROGRESSION_COMBAT_XP_SCALE": AttributeSpec(Subsystem.PROGRESSION, "int", 1, (0, None)),
    "PROGRESSION_AMMUNITION_XP_SCALE": AttributeSpec(Subsystem.PROGRESSION, "int", 1, (0, None)),
    "PROGRESSION_CONSUMABLE_XP_SCALE": AttributeSpec(Subsystem.PROGRESSION, "int", 1, (0, None)),
    "PROGRESSION_MELEE_BASE_DAMAGE": AttributeSpec(Subsystem.PROGRESSION, "int", 10, (0, None)),
    "PROGRESSION_MELEE_LEVEL_DAMAGE": AttributeSpec(Subsystem.PROGRESSION, "int", 2, (0, None)),
    "PROGRESSION_RANGE_BASE_DAMAGE": AttributeSpec(Subsystem.PROGRESSION, "int", 10, (0, None)),
    "PROGRESSION_RANGE_LEVEL_DAMAGE": AttributeSpec(Subsystem.PROGRESSION, "int", 2, (0, None)),
    "PROGRESSION_MAGE_BASE_DAMAGE": AttributeSpec(Subsystem.PROGRESSION, "int", 10, (0, None)),
    "PROGRESSION_MAGE_LEVEL_DAMAGE": AttributeSpec(Subsystem.PROGRESSION, "int", 2, (0, None)),
    "PROGRESSION_BASE_DEFENSE": AttributeSpec(Subsystem.PROGRESSION, "int", 0, (0, None)),
    "PROGRESSION_LEVEL_DEFENSE": AttributeSpec(Subsystem.PROGRESSION, "int", 2, (0, None)),
    # --- Exchange ---------------------------------------------------------------------
    "EXCHANGE_BASE_GOLD": AttributeSpec(Subsystem.EXCHANGE, "int", 10, (0, None)),
    "EXCHANGE_LISTING_DURATION": AttributeSpec(Subsystem.EXCHANGE, "int", 5, (1, None)),
    "MARKET_N_OBS": AttributeSpec(Subsystem.EXCHANGE, "int", 384, (1, None)),
    "PRICE_N_OBS": AttributeSpec(Subsystem.EXCHANGE, "int", 99, (1, None)),
}

# Keys whose value must stay inside [0, 1]; used by range validation in
# addition to the per-key bounds above (kept explicit so the validator's
# error messages can say "probability").
PROBABILITY_KEYS = frozenset(
    k for k, s in SCHEMA.items() if s.bounds == (0.0, 1.0) and s.kind == "float"
)
