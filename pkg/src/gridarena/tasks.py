"""Task predicates, monotone progress, rewards, scoring, and hash embeddings.

A TaskSpec is a predicate plus parameters; progress is always in [0, 1] and
rewards are deltas of the running maximum progress.  The module offers two
evaluation routes: live evaluation against the running world (used by the
engine each tick) and a pure reconstruction from a serialized event log
(used for replay scoring), which must agree exactly.
"""

from __future__ import annotations

import hashlib
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .config import GameConfig
from .defaults import Subsystem
from .economy import HARVEST_TABLE, AMMO_PROFESSIONS, ItemType, Skill, fully_armed
from .errors import MissingCategory, UnknownAssignee
from .events import EventType, GameEvent

CATEGORIES = ("Survival", "Combat", "Exploration", "Skill", "Item", "Market")

# Items harvested by professions, reverse-mapped from the harvest table.
ITEM_HARVEST_SKILL = {item.value: skill for _, (skill, item) in HARVEST_TABLE.items()}

# Subsystem flag order inside the task observation: team flag, agent flag,
# then the nine optional subsystems (all but Terrain).
OPTIONAL_SUBSYSTEMS = (
    Subsystem.RESOURCE, Subsystem.COMBAT, Subsystem.NPC, Subsystem.COMMUNICATION,
    Subsystem.ITEM, Subsystem.EQUIPMENT, Subsystem.PROFESSION,
    Subsystem.PROGRESSION, Subsystem.EXCHANGE,
)


@dataclass(frozen=True)
class TaskSpec:
    """Predicate name, sorted parameters, and scoring category."""

    predicate: str
    params: tuple
    category: str

    @classmethod
    def make(cls, predicate: str, category: str, **params) -> "TaskSpec":
        return cls(predicate, tuple(sorted(params.items())), category)

    def param(self, key, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default

    def canonical(self) -> str:
        """Serialization that defines the hash domain: NAME(key=value,...)."""
        inner = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.predicate}({inner})"


@dataclass
class TaskState:
    progress: float = 0.0
    max_progress: float = 0.0

    @property
    def completed(self) -> bool:
        return self.max_progress >= 1.0

    def record(self, progress: float) -> float:
        """Update and return the reward (positive delta of the maximum)."""
        progress = min(max(progress, 0.0), 1.0)
        self.progress = progress
        reward = max(0.0, progress - self.max_progress)
        self.max_progress = max(self.max_progress, progress)
        return reward


@dataclass
class TaskAssignment:
    spec: TaskSpec
    assignee: int
    scope: str = "agent"  # "agent" | "team"
    state: TaskState = field(default_factory=TaskState)


def task_reward(prev: TaskState, cur: TaskState) -> float:
    return max(0.0, cur.max_progress - prev.max_progress)


@dataclass(frozen=True)
class ShapingWeights:
    """Weights for the optional dense reward terms; zero disables shaping."""

    health: float = 0.0
    xp: float = 0.0
    offense: float = 0.0
    defense: float = 0.0
    gold: float = 0.0

    def any(self) -> bool:
        return any((self.health, self.xp, self.offense, self.defense, self.gold))


def shaped_reward(deltas: dict, weights: ShapingWeights, task_delta: float = 0.0) -> float:
    """Weighted per-tick entity deltas plus the task reward."""
    return (
        task_delta
        + weights.health * deltas.get("health", 0)
        + weights.xp * deltas.get("xp", 0)
        + weights.offense * deltas.get("offense", 0)
        + weights.defense * deltas.get("defense", 0)
        + weights.gold * deltas.get("gold", 0)
    )


# --- event counters (shared by live scoring) -----------------------------------


class EventCounters:
    """Per-agent tallies of everything count-like the predicates consume."""

    def __init__(self):
        self.event_counts: dict[int, Counter] = defaultdict(Counter)
        self.defeat_levels: dict[int, list[int]] = defaultdict(list)
        self.item_events: dict[tuple[int, EventType, int], Counter] = defaultdict(Counter)
        self.earned_gold: dict[int, int] = defaultdict(int)
        self.spent_gold: dict[int, int] = defaultdict(int)

    def observe(self, event: GameEvent) -> None:
        self.event_counts[event.subject][event.type] += 1
        if event.type is EventType.DEFEAT_NPC:
            self.defeat_levels[event.subject].append(event.level or 0)
        elif event.type in (EventType.HARVEST_ITEM, EventType.CONSUME_ITEM):
            self.item_events[(event.subject, event.type, event.item)][event.level] += 1
        elif event.type is EventType.EQUIP_ITEM and event.quantity == 1:
            self.item_events[(event.subject, event.type, event.item)][event.level] += 1
        elif event.type is EventType.EARN_GOLD:
            self.earned_gold[event.subject] += event.gold or 0
        elif event.type is EventType.BUY_ITEM:
            self.spent_gold[event.subject] += event.gold or 0

    def count_at_least(self, agent: int, etype: EventType, item: int,
                       min_level: int) -> int:
        counter = self.item_events.get((agent, etype, item))
        if not counter:
            return 0
        return sum(n for level, n in counter.items() if (level or 0) >= min_level)


# --- live evaluation --------------------------------------------------------------
#
# ``view`` is the engine WorldState: it must expose tick, entities, tile_map,
# counters (EventCounters), team_members(team), center_hold(team),
# leader_alive(team), winner ((kind, id) or None), and horizon.


def _ratio(value: float, target: float) -> float:
    if target <= 0:
        return 1.0
    return min(value / target, 1.0)


def eval_predicate(assignment: TaskAssignment, view) -> float:
    """Current progress in [0,1] for one assignment against the live world."""
    spec = assignment.spec
    name = spec.predicate
    a = assignment.assignee

    if assignment.scope == "agent":
        entity = view.entities.get(a)
        if entity is None:
            raise UnknownAssignee(f"agent {a}")
    else:
        if not view.team_members(a):
            raise UnknownAssignee(f"team {a}")
        entity = None

    if name == "TickGE":
        return _ratio(entity.time_alive(view.tick), spec.param("num_tick"))
    if name == "CountEvent":
        etype = EventType(spec.param("event"))
        return _ratio(view.counters.event_counts[a][etype], spec.param("n"))
    if name == "DefeatEntity":
        min_level = spec.param("min_level")
        count = sum(1 for lvl in view.counters.defeat_levels[a] if lvl >= min_level)
        return _ratio(count, spec.param("n"))
    if name == "OccupyTile":
        target = (spec.param("row"), spec.param("col"))
        if not entity.alive:
            return 0.0
        d = max(abs(entity.pos[0] - target[0]), abs(entity.pos[1] - target[1]))
        if d == 0:
            return 1.0
        return max(0.0, 1.0 - d / view.tile_map.playable) * 0.99
    if name == "AttainSkill":
        target = spec.param("level")
        level = entity.level(Skill(spec.param("skill")))
        if target <= 1:
            return 1.0
        return _ratio(level - 1, target - 1)
    if name == "HarvestItem":
        count = view.counters.count_at_least(
            a, EventType.HARVEST_ITEM, ItemType[spec.param("item").upper()].value,
            spec.param("min_level"))
        return _ratio(count, spec.param("n"))
    if name == "ConsumeItem":
        count = view.counters.count_at_least(
            a, EventType.CONSUME_ITEM, ItemType[spec.param("item").upper()].value,
            spec.param("min_level"))
        return _ratio(count, spec.param("n"))
    if name == "EquipItem":
        count = view.counters.count_at_least(
            a, EventType.EQUIP_ITEM, ItemType[spec.param("item").upper()].value,
            spec.param("min_level"))
        return _ratio(count, spec.param("n"))
    if name == "FullyArmed":
        if not entity.alive:
            return 0.0
        pieces = fully_armed(entity, Skill(spec.param("style")), spec.param("min_level"))
        return pieces / 4.0
    if name == "EarnGold":
        return _ratio(view.counters.earned_gold[a], spec.param("amount"))
    if name == "HoardGold":
        return _ratio(entity.gold, spec.param("amount"))
    if name == "MakeProfit":
        profit = view.counters.earned_gold[a] - view.counters.spent_gold[a]
        return _ratio(max(0, profit), spec.param("amount"))
    if name == "SeizeCenter":
        return _ratio(view.center_hold(a), spec.param("duration"))
    if name == "ProtectLeader":
        return 1.0 if view.leader_alive(a) else 0.0
    if name == "LastTeamStanding":
        return 1.0 if view.winner == ("team", a) else 0.0
    if name == "ReachCenterFirst":
        return 1.0 if view.winner == ("agent", a) else 0.0
    raise ValueError(f"unknown predicate {name}")


# --- embedding ---------------------------------------------------------------------


def task_flags(cfg: GameConfig, team_game: bool) -> list[float]:
    """The 11 binary flags: team game, agent game, nine subsystem toggles."""
    flags = [1.0 if team_game else 0.0, 0.0 if team_game else 1.0]
    flags.extend(1.0 if cfg.enabled(s) else 0.0 for s in OPTIONAL_SUBSYSTEMS)
    return flags


def embed_task(spec: TaskSpec, flags) -> np.ndarray:
    """27 reals: 11 flags plus 16 hash-derived values in [-1, 1].

    The hash covers the canonical predicate serialization, so embeddings are
    deterministic across platforms and distinct specs almost surely differ.
    """
    flags = list(flags)
    if len(flags) != 11:
        raise ValueError("expected 11 flags")
    digest = hashlib.sha256(spec.canonical().encode("utf-8")).digest()[:16]
    values = [b / 127.5 - 1.0 for b in digest]
    return np.asarray(flags + values, dtype=np.float32)


# --- scoring -------------------------------------------------------------------------


def normalized_score(per_task_progress) -> float:
    """100/6-weighted mean of per-category mean max progress.

    Accepts a mapping TaskSpec -> max progress or an iterable of pairs;
    raises MissingCategory unless all six categories are represented.
    """
    if hasattr(per_task_progress, "items"):
        pairs = list(per_task_progress.items())
    else:
        pairs = list(per_task_progress)
    by_category: dict[str, list[float]] = defaultdict(list)
    for spec, progress in pairs:
        by_category[spec.category].append(progress)
    missing = [c for c in CATEGORIES if c not in by_category]
    if missing:
        raise MissingCategory(", ".join(missing))
    return sum((100.0 / 6.0) * (sum(v) / len(v)) for v in
               (by_category[c] for c in CATEGORIES))


# --- the 63-task evaluation suite ------------------------------------------------------

EQUIPPABLE_ITEMS = ("Hat", "Top", "Bottom", "Spear", "Bow", "Wand", "Axe", "Gloves",
                    "Rod", "Pickaxe", "Chisel", "Whetstone", "Arrow", "Runes")


def evaluation_suite() -> list[TaskSpec]:
    """The fixed 63-task evaluation suite across the six categories."""
    make = TaskSpec.make
    tasks = [make("TickGE", "Survival", num_tick=1024)]
    tasks += [
        make("CountEvent", "Combat", event="PLAYER_KILL", n=20),
        make("DefeatEntity", "Combat", kind="npc", min_level=1, n=20),
        make("DefeatEntity", "Combat", kind="npc", min_level=3, n=20),
    ]
    tasks += [
        make("CountEvent", "Exploration", event="GO_FARTHEST", n=64),
        make("OccupyTile", "Exploration", row=80, col=80),
    ]
    for skill in ("Melee", "Mage", "Range", "Fishing", "Herbalism",
                  "Prospecting", "Alchemy", "Carving"):
        tasks.append(make("AttainSkill", "Skill", skill=skill, level=10))
    for item in ("Whetstone", "Arrow", "Runes"):
        for min_level in (1, 3):
            tasks.append(make("HarvestItem", "Item", item=item,
                              min_level=min_level, n=20))
    for item in ("Ration", "Potion"):
        for min_level in (1, 3):
            tasks.append(make("ConsumeItem", "Item", item=item,
                              min_level=min_level, n=20))
    for item in EQUIPPABLE_ITEMS:
        for min_level in (1, 3):
            tasks.append(make("EquipItem", "Item", item=item,
                              min_level=min_level, n=1))
    for style in ("Melee", "Mage", "Range"):
        for min_level in (1, 3):
            tasks.append(make("FullyArmed", "Item", style=style,
                              min_level=min_level, n=1))
    tasks += [
        make("CountEvent", "Market", event="EARN_GOLD", n=20),
        make("CountEvent", "Market", event="BUY_ITEM", n=20),
        make("EarnGold", "Market", amount=100),
        make("HoardGold", "Market", amount=100),
        make("MakeProfit", "Market", amount=100),
    ]
    return tasks


def task_variants(rng, count: int) -> list[TaskSpec]:
    """Randomly parameterized variants for curriculum-style task sampling."""
    make = TaskSpec.make
    out = []
    for _ in range(count):
        roll = int(rng.integers(6))
        if roll == 0:
            out.append(make("TickGE", "Survival", num_tick=int(rng.integers(64, 1025))))
        elif roll == 1:
            out.append(make("CountEvent", "Combat", event="PLAYER_KILL",
                            n=int(rng.integers(1, 30))))
        elif roll == 2:
            out.append(make("OccupyTile", "Exploration",
                            row=int(rng.integers(20, 120)),
                            col=int(rng.integers(20, 120))))
        elif roll == 3:
            skill = ("Melee", "Range", "Mage")[int(rng.integers(3))]
            out.append(make("AttainSkill", "Skill", skill=skill,
                            level=int(rng.integers(2, 11))))
        elif roll == 4:
            item = EQUIPPABLE_ITEMS[int(rng.integers(len(EQUIPPABLE_ITEMS)))]
            out.append(make("EquipItem", "Item", item=item, min_level=1, n=1))
        else:
            out.append(make("EarnGold", "Market", amount=int(rng.integers(10, 200))))
    return out


# --- pure reconstruction from a serialized event log --------------------------------------


@dataclass
class ReplayMeta:
    """Episode facts the log scorer needs besides the events themselves."""

    final_tick: int
    playable: int
    center: tuple[int, int]
    spawn_tick: dict = field(default_factory=dict)
    teams: dict = field(default_factory=dict)
    leaders: dict = field(default_factory=dict)
    winner: tuple | None = None


def progress_from_log(assignments: list[TaskAssignment], events: list[GameEvent],
                      meta: ReplayMeta, cfg: GameConfig) -> list[float]:
    """Max progress per assignment recomputed purely from the event log.

    Levels are rebuilt from XP-granting events, gold from gold-flow events,
    and positions from SEIZE_TILE breadcrumbs, so the result must equal the
    live-computed max progress exactly.
    """
    from .entities import level_from_xp  # local import avoids a cycle

    counters = EventCounters()
    xp: dict[tuple[int, Skill], int] = defaultdict(int)
    gold: dict[int, int] = defaultdict(int)
    max_gold: dict[int, int] = defaultdict(int)
    equipped: dict[int, dict] = defaultdict(dict)  # agent -> {(slotkey): (item, level)}
    max_pieces: dict[tuple[int, str, int], int] = defaultdict(int)
    best_seize: dict[tuple[int, int, int], int] = {}
    death_tick: dict[int, int] = {}
    hold_by_tick: dict[int,set] = defaultdict(set)
    team_of = {a: t for t, members in meta.teams.items() for a in members}

    combat_scale = cfg.effective("PROGRESSION_COMBAT_XP_SCALE")
    ammo_scale = cfg.effective("PROGRESSION_AMMUNITION_XP_SCALE")
    cons_scale = cfg.effective("PROGRESSION_CONSUMABLE_XP_SCALE")
    base_gold = cfg.effective("EXCHANGE_BASE_GOLD") \
        if cfg.enabled(Subsystem.EXCHANGE) else 0
    styles = (Skill.MELEE, Skill.RANGE, Skill.MAGE)

    for agent in meta.spawn_tick:
        gold[agent] = base_gold
        max_gold[agent] = base_gold

    fully_armed_specs = [(i, a) for i, a in enumerate(assignments)
                         if a.spec.predicate == "FullyArmed"]

    def pieces(agent: int, style_name: str, min_level: int) -> int:
        want = {("weapon", style_name), ("hat", None), ("top", None), ("bottom", None)}
        have = 0
        for (slot, style_key), (item, level) in equipped[agent].items():
            if (slot, style_key) in want and level >= min_level:
                have += 1
        return have

    _slot_style = {  # equipment slot layout mirrored from the economy module
        ItemType.HAT.value: ("hat", None), ItemType.TOP.value: ("top", None),
        ItemType.BOTTOM.value: ("bottom", None),
        ItemType.SPEAR.value: ("weapon", "Melee"), ItemType.BOW.value: ("weapon", "Range"),
        ItemType.WAND.value: ("weapon", "Mage"),
        ItemType.WHETSTONE.value: ("ammo", "Melee"), ItemType.ARROW.value: ("ammo", "Range"),
        ItemType.RUNES.value: ("ammo", "Mage"),
        ItemType.AXE.value: ("tool", None), ItemType.GLOVES.value: ("tool", None),
        ItemType.ROD.value: ("tool", None), ItemType.PICKAXE.value: ("tool", None),
        ItemType.CHISEL.value: ("tool", None),
    }

    for event in events:
        counters.observe(event)
        subject = event.subject
        if event.type is EventType.SCORE_HIT and subject > 0:
            if cfg.enabled(Subsystem.PROGRESSION):
                xp[(subject, styles[event.style])] += combat_scale
        elif event.type is EventType.HARVEST_ITEM:
            skill = ITEM_HARVEST_SKILL.get(event.item)
            if skill is not None and cfg.enabled(Subsystem.PROGRESSION):
                scale = ammo_scale if skill in AMMO_PROFESSIONS else cons_scale
                xp[(subject, skill)] += scale
        elif event.type is EventType.EARN_GOLD:
            gold[subject] += event.gold or 0
            max_gold[subject] = max(max_gold[subject], gold[subject])
        elif event.type is EventType.BUY_ITEM:
            gold[subject] -= event.gold or 0
        elif event.type is EventType.GIVE_GOLD:
            gold[subject] -= event.gold or 0
            gold[event.target] += event.gold or 0
            max_gold[event.target] = max(max_gold[event.target], gold[event.target])
        elif event.type is EventType.PLAYER_KILL and event.gold:
            gold[event.target] -= event.gold
        elif event.type is EventType.EQUIP_ITEM:
            key = _slot_style.get(event.item)
            if key is not None:
                if event.quantity == 1:
                    equipped[subject][key] = (event.item, event.level)
                else:
                    current = equipped[subject].get(key)
                    if current is not None and current == (event.item, event.level):
                        del equipped[subject][key]
            for idx, assignment in fully_armed_specs:
                if assignment.assignee == subject:
                    spec = assignment.spec
                    have = pieces(subject, spec.param("style"), spec.param("min_level"))
                    key2 = (subject, spec.param("style"), spec.param("min_level"))
                    max_pieces[key2] = max(max_pieces[key2], have)
        elif event.type is EventType.SEIZE_TILE:
            key = (subject, event.row, event.col)
            d = event.distance or 0
            if key not in best_seize or d < best_seize[key]:
                best_seize[key] = d
            if (event.row, event.col) == meta.center and d == 0 \
                    and subject in team_of:
                hold_by_tick[event.tick].add(team_of[subject])
        elif event.type is EventType.AGENT_DEATH:
            death_tick[subject] = event.tick

    def max_hold(team: int) -> int:
        best = streak = 0
        for tick in range(1, meta.final_tick + 1):
            if team in hold_by_tick.get(tick, ()):
                streak += 1
                best = max(best, streak)
            else:
                streak = 0
        return best

    results = []
    for assignment in assignments:
        spec, a = assignment.spec, assignment.assignee
        name = spec.predicate
        if name == "TickGE":
            end = death_tick.get(a, meta.final_tick)
            alive = max(0, end - meta.spawn_tick.get(a, 0))
            value = _ratio(alive, spec.param("num_tick"))
        elif name == "CountEvent":
            etype = EventType(spec.param("event"))
            value = _ratio(counters.event_counts[a][etype], spec.param("n"))
        elif name == "DefeatEntity":
            min_level = spec.param("min_level")
            count = sum(1 for lvl in counters.defeat_levels[a] if lvl >= min_level)
            value = _ratio(count, spec.param("n"))
        elif name == "OccupyTile":
            key = (a, spec.param("row"), spec.param("col"))
            if key not in best_seize:
                value = 0.0
            elif best_seize[key] == 0:
                value = 1.0
            else:
                value = max(0.0, 1.0 - best_seize[key] / meta.playable) * 0.99
        elif name == "AttainSkill":
            skill = Skill(spec.param("skill"))
            level = level_from_xp(xp[(a, skill)], cfg)
            target = spec.param("level")
            value = 1.0 if target <= 1 else _ratio(level - 1, target - 1)
        elif name in ("HarvestItem", "ConsumeItem", "EquipItem"):
            etype = {"HarvestItem": EventType.HARVEST_ITEM,
                     "ConsumeItem": EventType.CONSUME_ITEM,
                     "EquipItem": EventType.EQUIP_ITEM}[name]
            count = counters.count_at_least(
                a, etype, ItemType[spec.param("item").upper()].value,
                spec.param("min_level"))
            value = _ratio(count, spec.param("n"))
        elif name == "FullyArmed":
            value = max_pieces[(a, spec.param("style"), spec.param("min_level"))] / 4.0
        elif name == "EarnGold":
            value = _ratio(counters.earned_gold[a], spec.param("amount"))
        elif name == "HoardGold":
            value = _ratio(max_gold[a], spec.param("amount"))
        elif name == "MakeProfit":
            profit = counters.earned_gold[a] - counters.spent_gold[a]
            value = _ratio(max(0, profit), spec.param("amount"))
        elif name == "SeizeCenter":
            value = _ratio(max_hold(a), spec.param("duration"))
        elif name == "ProtectLeader":
            leader = meta.leaders.get(a)
            died = death_tick.get(leader)
            value = 1.0 if (leader is not None and (died is None or died >= 2)) else 0.0
        elif name == "LastTeamStanding":
            value = 1.0 if meta.winner == ("team", a) else 0.0
        elif name == "ReachCenterFirst":
            value = 1.0 if meta.winner == ("agent", a) else 0.0
        else:
            raise ValueError(name)
        results.append(min(1.0, value))
    return results
