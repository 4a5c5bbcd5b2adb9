"""The seven minigame rule-sets: toggles, spawning, difficulty, win detection.

Each kind maps to one row of the subsystem toggle matrix; ``setup_episode``
resets the config and layers the minigame's overrides (including adaptive
difficulty and domain randomization) for the coming episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .config import GameConfig, team_assignments
from .defaults import FULL_SUBSYSTEMS, MINI_SUBSYSTEMS, Subsystem
from .entities import SpawnMode, chebyshev
from .errors import EmptyPack, ProfileMismatch


class MinigameKind(Enum):
    SURVIVAL = "survival"
    TEAM_BATTLE = "team_battle"
    MULTI_TASK = "multi_task"
    PROTECT_THE_KING = "protect_the_king"
    RACE_TO_CENTER = "race_to_center"
    KING_OF_THE_HILL = "king_of_the_hill"
    SANDWICH = "sandwich"


_CORE = frozenset({Subsystem.TERRAIN, Subsystem.RESOURCE, Subsystem.COMBAT,
                   Subsystem.NPC, Subsystem.COMMUNICATION})

# (team_game, subsystems when mini, subsystems when full)
_MATRIX: dict[MinigameKind, tuple[bool, frozenset, frozenset | None]] = {
    MinigameKind.SURVIVAL: (False, _CORE, FULL_SUBSYSTEMS),
    MinigameKind.TEAM_BATTLE: (True, _CORE, FULL_SUBSYSTEMS),
    MinigameKind.MULTI_TASK: (False, None, FULL_SUBSYSTEMS),
    MinigameKind.PROTECT_THE_KING: (True, _CORE, _CORE),
    MinigameKind.RACE_TO_CENTER: (
        False, frozenset({Subsystem.TERRAIN, Subsystem.RESOURCE}),
        frozenset({Subsystem.TERRAIN, Subsystem.RESOURCE})),
    MinigameKind.KING_OF_THE_HILL: (
        True, frozenset({Subsystem.TERRAIN, Subsystem.RESOURCE, Subsystem.COMBAT,
                         Subsystem.COMMUNICATION}),
        frozenset({Subsystem.TERRAIN, Subsystem.RESOURCE, Subsystem.COMBAT,
                   Subsystem.COMMUNICATION})),
    MinigameKind.SANDWICH: (
        True, frozenset({Subsystem.TERRAIN, Subsystem.COMBAT, Subsystem.NPC,
                         Subsystem.COMMUNICATION}),
        frozenset({Subsystem.TERRAIN, Subsystem.COMBAT, Subsystem.NPC,
                   Subsystem.COMMUNICATION})),
}


def is_team_game(kind: MinigameKind) -> bool:
    return _MATRIX[kind][0]


def subsystems_for(kind: MinigameKind, profile: str) -> frozenset:
    """Toggle row for a kind under a profile; ProfileMismatch if unsupported."""
    team, mini_set, full_set = _MATRIX[kind]
    chosen = mini_set if profile == "mini" else full_set
    if chosen is None:
        raise ProfileMismatch(f"{kind.value} requires the full profile")
    limit = MINI_SUBSYSTEMS if profile == "mini" else FULL_SUBSYSTEMS
    return frozenset(chosen) & limit


# --- game packs -----------------------------------------------------------------


@dataclass(frozen=True)
class GamePack:
    entries: tuple

    def __post_init__(self):
        if not self.entries:
            raise EmptyPack("game pack has no entries")
        if any(w <= 0 for _, w in self.entries):
            raise EmptyPack("game pack weights must be positive")


def sample_game(pack: GamePack, rng: np.random.Generator) -> MinigameKind:
    weights = np.asarray([w for _, w in pack.entries], dtype=np.float64)
    probs = weights / weights.sum()
    idx = int(rng.choice(len(probs), p=probs))
    return pack.entries[idx][0]


def parse_game_pack(text: str) -> GamePack:
    """Parse the config-file syntax ``kind:weight,kind:weight,...``."""
    entries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if ":" in chunk:
            name, weight = chunk.split(":", 1)
            entries.append((MinigameKind(name.strip()), float(weight)))
        else:
            entries.append((MinigameKind(chunk), 1.0))
    return GamePack(tuple(entries))


def default_pack(profile: str) -> GamePack:
    if profile == "full":
        kinds = (MinigameKind.SURVIVAL, MinigameKind.TEAM_BATTLE,
                 MinigameKind.MULTI_TASK)
    else:
        kinds = (MinigameKind.TEAM_BATTLE, MinigameKind.PROTECT_THE_KING,
                 MinigameKind.RACE_TO_CENTER, MinigameKind.KING_OF_THE_HILL,
                 MinigameKind.SANDWICH)
    return GamePack(tuple((k, 1.0) for k in kinds))


# --- adaptive difficulty -----------------------------------------------------------

RACE_INITIAL_MAP = 40
RACE_STEP = 8
KOH_INITIAL_HOLD = 10
KOH_HOLD_STEP = 10
KOH_HOLD_MAX = 200
SANDWICH_INITIAL_MULTIPLIER = 1.0
SANDWICH_MULTIPLIER_STEP = 0.5
NUM_GAME_WON = 1


@dataclass
class GameRecord:
    won: bool
    difficulty: dict


@dataclass
class GameHistory:
    """Append-only win/loss records with the per-kind difficulty trackers."""

    records: list = field(default_factory=list)
    adaptive: bool = True
    map_size: int = RACE_INITIAL_MAP
    hold_duration: int = KOH_INITIAL_HOLD
    npc_multiplier: float = SANDWICH_INITIAL_MULTIPLIER

    def record(self, won: bool, difficulty: dict) -> None:
        self.records.append(GameRecord(won, dict(difficulty)))


def _stepped(history: GameHistory, key: str, current, step, cap) -> bool:
    """The shared difficulty rule: step up only after a win at this setting."""
    if not (history.adaptive and history.records and history.records[-1].won):
        return False
    wins_here = sum(1 for r in history.records
                    if r.difficulty.get(key) == current and r.won)
    if wins_here < NUM_GAME_WON:
        return False
    return cap is None or current <= cap - step


def determine_difficulty(kind: MinigameKind, history: GameHistory,
                         cfg: GameConfig) -> dict:
    """Advance the kind's difficulty parameter if its win rule fired.

    Parameters never decrease; the race map size is capped by the original
    MAP_CENTER, the hold duration by 200 ticks.
    """
    if kind is MinigameKind.RACE_TO_CENTER:
        if _stepped(history, "map_size", history.map_size, RACE_STEP,
                    cfg.original("MAP_CENTER")):
            history.map_size += RACE_STEP
        return {"map_size": history.map_size}
    if kind is MinigameKind.KING_OF_THE_HILL:
        if _stepped(history, "hold_duration", history.hold_duration,
                    KOH_HOLD_STEP, KOH_HOLD_MAX):
            history.hold_duration += KOH_HOLD_STEP
        return {"hold_duration": history.hold_duration}
    if kind is MinigameKind.SANDWICH:
        if _stepped(history, "npc_multiplier", history.npc_multiplier,
                    SANDWICH_MULTIPLIER_STEP, None):
            history.npc_multiplier += SANDWICH_MULTIPLIER_STEP
        return {"npc_multiplier": history.npc_multiplier}
    return {}


# --- episode setup --------------------------------------------------------------


@dataclass
class EpisodeSetup:
    kind: MinigameKind
    team_game: bool
    spawn_mode: SpawnMode
    npc_regions: tuple = ("anywhere",)
    has_leaders: bool = False
    hold_duration: int | None = None
    min_victory_tick: int = 0
    difficulty: dict = field(default_factory=dict)
    task_plan: str = "tick"


def setup_episode(kind: MinigameKind, cfg: GameConfig, history: GameHistory,
                  rng: np.random.Generator) -> EpisodeSetup:
    """Reset the config and apply the minigame's per-episode overrides."""
    cfg.reset_overrides()
    cfg.set_subsystems_for_episode(subsystems_for(kind, cfg.profile))
    team = is_team_game(kind)
    difficulty = determine_difficulty(kind, history, cfg)
    setup = EpisodeSetup(kind=kind, team_game=team, spawn_mode=SpawnMode.EDGE_SCATTER,
                         difficulty=difficulty)

    if kind is MinigameKind.SURVIVAL:
        fog_onset = int(rng.integers(32, 256))
        fog_speed = 1.0 / int(rng.integers(7, 12))
        cfg.set_for_episode("DEATH_FOG_ONSET", fog_onset)
        cfg.set_for_episode("DEATH_FOG_SPEED", fog_speed)
        cfg.set_for_episode("NPC_N", int(rng.integers(64, 256)))
    elif kind is MinigameKind.TEAM_BATTLE:
        setup.spawn_mode = SpawnMode.TEAM_TILE
    elif kind is MinigameKind.MULTI_TASK:
        setup.task_plan = "multitask"
    elif kind is MinigameKind.PROTECT_THE_KING:
        setup.spawn_mode = SpawnMode.TEAM_TILE
        setup.has_leaders = True
        setup.task_plan = "ptk"
    elif kind is MinigameKind.RACE_TO_CENTER:
        cfg.set_for_episode("MAP_CENTER", difficulty["map_size"])
        setup.task_plan = "race"
    elif kind is MinigameKind.KING_OF_THE_HILL:
        cfg.set_for_episode("MAP_CENTER", 60)
        setup.spawn_mode = SpawnMode.TEAM_TILE
        setup.hold_duration = difficulty["hold_duration"]
        setup.task_plan = "koh"
    elif kind is MinigameKind.SANDWICH:
        cfg.set_for_episode("MAP_CENTER", 80)
        cfg.set_for_episode("TEAMS", 16)
        cfg.set_for_episode("DEATH_FOG_ONSET", 32)
        cfg.set_for_episode("DEATH_FOG_SPEED", 0.25)
        # Every NPC spawned mid-game behaves aggressively.
        cfg.set_for_episode("NPC_SPAWN_AGGRESSIVE", 1.0)
        cfg.set_for_episode(
            "NPC_N", int(cfg.original("NPC_N") * difficulty["npc_multiplier"]))
        setup.spawn_mode = SpawnMode.CIRCLE
        setup.npc_regions = ("edge_ring", "center")
        setup.min_victory_tick = 500
        setup.task_plan = "sandwich"

    if team:
        teams = cfg.effective("TEAMS")
        if isinstance(teams, int):
            cfg.set_for_episode(
                "TEAMS", team_assignments(cfg.effective("PLAYER_N"), teams))
    return setup


# --- win detection -------------------------------------------------------------------
#
# ``view`` protocol: living_teams() -> set, living_agents() -> list,
# center_hold(team) -> int, agents_at_center() -> sorted agent ids, tick.


def check_winner(setup: EpisodeSetup, view):
    """Winner for this tick, or None.  The engine latches the first result."""
    kind = setup.kind
    if kind in (MinigameKind.SURVIVAL, MinigameKind.MULTI_TASK):
        return None
    if kind is MinigameKind.RACE_TO_CENTER:
        arrivals = view.agents_at_center()
        if arrivals:
            return ("agent", arrivals[0])
        return None
    if kind is MinigameKind.KING_OF_THE_HILL:
        held = [(t, view.center_hold(t)) for t in sorted(view.living_teams())]
        for team, streak in held:
            if streak >= setup.hold_duration:
                return ("team", team)
        return None
    # Elimination games: Team Battle, Protect the King, Sandwich.
    alive = view.living_teams()
    if len(alive) == 1:
        team = next(iter(alive))
        if view.tick >= setup.min_victory_tick:
            return ("team", team)
    return None


# --- team action masking ---------------------------------------------------------------


def team_mask_actions(bundles: dict, entities: dict, team_game: bool) -> dict:
    """Strip attacks on teammates and gifts to opponents from decoded bundles.

    The observation masks already hide these; this is the engine-side
    re-check so hand-built bundles obey team semantics too.
    """
    if not team_game:
        return bundles
    for agent_id, bundle in bundles.items():
        me = entities.get(agent_id)
        if me is None or me.team is None:
            continue
        if bundle.attack_target is not None:
            target = entities.get(bundle.attack_target)
            if target is not None and target.team == me.team:
                bundle.attack_target = None
        if bundle.give_target is not None:
            target = entities.get(bundle.give_target)
            if target is None or target.team != me.team:
                bundle.give_target = None
                bundle.give_slot = None
        if bundle.gold_target is not None:
            target = entities.get(bundle.gold_target)
            if target is None or target.team != me.team:
                bundle.gold_target = None
                bundle.gold_amount = None
    return bundles


# --- communication protocol ---------------------------------------------------------------


def pack_status(health_quartile: int, npc_count: int, foe_count: int,
                key_visible: bool) -> int:
    """7-bit status: bits 0-1 health quartile, 2-3 NPCs, 4-5 foes, 6 key flag."""
    if not 0 <= health_quartile <= 3:
        raise ValueError("health quartile out of range")
    token = health_quartile
    token |= min(3, max(0, npc_count)) << 2
    token |= min(3, max(0, foe_count)) << 4
    token |= (1 if key_visible else 0) << 6
    return token


def unpack_status(token: int) -> tuple[int, int, int, bool]:
    if not 0 <= token <= 127:
        raise ValueError("token out of range")
    return (token & 3, (token >> 2) & 3, (token >> 4) & 3, bool(token >> 6))


def comm_protocol_token(agent, view, cfg: GameConfig) -> int:
    """Scripted broadcast of health, nearby NPCs/foes, and key-target flag.

    An all-zero status packs to the reserved silent token 0, so the result
    floors at 1.
    """
    vision = cfg.effective("PLAYER_VISION_RADIUS")
    quartile = min(3, agent.health * 4 // max(1, agent.max_health))
    npcs = foes = 0
    for other in view.entities.values():
        if not other.alive or other.id == agent.id:
            continue
        if chebyshev(agent.pos, other.pos) > vision:
            continue
        if not other.is_player:
            npcs += 1
        elif agent.team is None or other.team != agent.team:
            foes += 1
    key = view.key_visible(agent)
    return max(1, pack_status(quartile, npcs, foes, key))
