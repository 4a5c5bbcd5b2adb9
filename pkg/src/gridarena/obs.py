"""Flat observation assembly and action decoding.

The layout is a profile-fixed superset: every component is present whether or
not its subsystem is enabled this episode (disabled parts are zeroed and
their masks expose only the no-op).  Mini flattens to 5,068 values and full
to 12,241; both totals are asserted at layout construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import economy
from .config import GameConfig
from .defaults import Subsystem
from .economy import AMMO_STYLE, Skill, item_class, matching_skill
from .entities import (
    DIRECTIONS,
    NOOP_MOVE,
    STYLES,
    EntityKind,
    legal_moves,
    style_reach,
)
from .errors import OutOfRangeIndex, UnknownAgent

ENTITY_ROWS = 100
ENTITY_FEATURES = 31
TILE_FEATURES = 7
ITEM_FEATURES = 16
COMM_FEATURES = 4

# Entity feature column indices (normalization constants in _entity_row).
EF_ID, EF_KIND, EF_SAME_TEAM, EF_SELF, EF_ATTACKER, EF_TOKEN = range(6)
EF_ROW, EF_COL, EF_TIME_ALIVE, EF_HEALTH, EF_FOOD, EF_WATER = range(6, 12)
EF_MELEE_LVL, EF_MELEE_XP, EF_RANGE_LVL, EF_RANGE_XP, EF_MAGE_LVL, EF_MAGE_XP = range(12, 18)
EF_FISHING, EF_HERBALISM, EF_PROSPECTING, EF_CARVING, EF_ALCHEMY = range(18, 23)
EF_GOLD, EF_OFFENSE, EF_DEFENSE, EF_COMBAT_STATUS, EF_IMMUNITY = range(23, 28)
EF_FOG, EF_DAMAGE_TAKEN, EF_KEY_TARGET = range(28, 31)

# Tile feature channels.
TF_ROW, TF_COL, TF_MATERIAL, TF_OCCUPANT, TF_RESOURCE, TF_FOG, TF_HARVESTABLE = range(7)

ID_NORM = 512.0
GOLD_NORM = 100.0
STAT_NORM = 50.0
FOG_NORM = 10.0


@dataclass(frozen=True)
class LayoutEntry:
    name: str
    shape: tuple
    offset: int

    @property
    def size(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n


class ObservationLayout:
    """Ordered component map from names to (shape, offset) in the flat vector."""

    def __init__(self, cfg: GameConfig):
        radius = cfg.effective("PLAYER_VISION_RADIUS")
        window = 2 * radius + 1
        task_dim = 11 + cfg.effective("TASK_EMBED_DIM")
        comm_rows = cfg.effective("COMMUNICATION_N_OBS")
        tokens = cfg.effective("COMMUNICATION_NUM_TOKENS")
        self.profile = cfg.profile
        self.window = window
        parts: list[tuple[str, tuple]] = [
            ("tick", (1,)),
            ("agent_id", (1,)),
            ("task", (task_dim,)),
            ("tile", (window * window, TILE_FEATURES)),
            ("entity", (ENTITY_ROWS, ENTITY_FEATURES)),
            ("comm", (comm_rows, COMM_FEATURES)),
        ]
        if cfg.profile == "full":
            inv_rows = cfg.effective("INVENTORY_N_OBS")
            market_rows = cfg.effective("MARKET_N_OBS")
            parts += [
                ("inventory", (inv_rows, ITEM_FEATURES)),
                ("market", (market_rows, ITEM_FEATURES)),
            ]
        parts += [
            ("mask_move", (len(DIRECTIONS),)),
            ("mask_attack_style", (len(STYLES),)),
            ("mask_attack_target", (ENTITY_ROWS + 1,)),
            ("mask_comm_token", (tokens,)),
        ]
        if cfg.profile == "full":
            capacity = cfg.effective("ITEM_INVENTORY_CAPACITY")
            market_rows = cfg.effective("MARKET_N_OBS")
            price_n = cfg.effective("PRICE_N_OBS")
            parts += [
                ("mask_use", (capacity + 1,)),
                ("mask_destroy", (capacity + 1,)),
                ("mask_give_item", (capacity + 1,)),
                ("mask_give_target", (ENTITY_ROWS + 1,)),
                ("mask_sell", (capacity + 1,)),
                ("mask_sell_price", (price_n,)),
                ("mask_buy", (market_rows + 1,)),
                ("mask_gold_target", (ENTITY_ROWS + 1,)),
                ("mask_gold_amount", (price_n,)),
            ]
        self.entries: dict[str, LayoutEntry] = {}
        offset = 0
        for name, shape in parts:
            entry = LayoutEntry(name, shape, offset)
            self.entries[name] = entry
            offset += entry.size
        self.total = offset
        # With shipped defaults the flat totals are load-bearing constants.
        from .defaults import SCHEMA
        size_keys = ("PLAYER_VISION_RADIUS", "TASK_EMBED_DIM",
                     "COMMUNICATION_N_OBS", "COMMUNICATION_NUM_TOKENS",
                     "INVENTORY_N_OBS", "MARKET_N_OBS", "PRICE_N_OBS",
                     "ITEM_INVENTORY_CAPACITY")
        if all(cfg.effective(k) == SCHEMA[k].default for k in size_keys):
            expected = 5068 if cfg.profile == "mini" else 12241
            assert self.total == expected, (self.total, expected)

    def slice(self, flat: np.ndarray, name: str) -> np.ndarray:
        entry = self.entries[name]
        return flat[entry.offset:entry.offset + entry.size].reshape(entry.shape)

    def manifest(self) -> str:
        """Text manifest: one ``name shape offset`` line per component."""
        lines = [f"profile {self.profile}", f"total {self.total}"]
        for entry in self.entries.values():
            shape = "x".join(str(d) for d in entry.shape)
            lines.append(f"{entry.name} {shape} {entry.offset}")
        return "\n".join(lines) + "\n"


# Action dimension order; decoded indices line up with these names.
MINI_ACTION_DIMS = ("move", "attack_style", "attack_target", "comm_token")
FULL_ACTION_DIMS = MINI_ACTION_DIMS + (
    "use", "destroy", "give_item", "give_target", "sell", "sell_price",
    "buy", "gold_target", "gold_amount")


_ACTION_DIM_CACHE: dict[tuple, list] = {}


def action_dims(cfg: GameConfig) -> list[tuple[str, int]]:
    key = (cfg.profile, cfg.effective("COMMUNICATION_NUM_TOKENS"),
           cfg.effective("ITEM_INVENTORY_CAPACITY"),
           cfg.effective("PRICE_N_OBS"), cfg.effective("MARKET_N_OBS"))
    cached = _ACTION_DIM_CACHE.get(key)
    if cached is not None:
        return cached
    dims = [
        ("move", len(DIRECTIONS)),
        ("attack_style", len(STYLES)),
        ("attack_target", ENTITY_ROWS + 1),
        ("comm_token", key[1]),
    ]
    if cfg.profile == "full":
        capacity = key[2]
        price_n = key[3]
        dims += [
            ("use", capacity + 1),
            ("destroy", capacity + 1),
            ("give_item", capacity + 1),
            ("give_target", ENTITY_ROWS + 1),
            ("sell", capacity + 1),
            ("sell_price", price_n),
            ("buy", key[4] + 1),
            ("gold_target", ENTITY_ROWS + 1),
            ("gold_amount", price_n),
        ]
    _ACTION_DIM_CACHE[key] = dims
    return dims


@dataclass
class ActionBundle:
    """Decoded, engine-facing action; None fields are no-ops.

    Targets are entity ids and buy is a listing id: decoding resolves the
    observation-row indirection.
    """

    move: int = NOOP_MOVE
    attack_style: int | None = None
    attack_target: int | None = None
    comm_token: int | None = None
    use_slot: int | None = None
    destroy_slot: int | None = None
    give_slot: int | None = None
    give_target: int | None = None
    sell_slot: int | None = None
    sell_price: int | None = None
    buy_listing: int | None = None
    gold_target: int | None = None
    gold_amount: int | None = None


def noop_action(cfg: GameConfig) -> np.ndarray:
    """Flat action whose every sub-action is the no-op sentinel."""
    dims = action_dims(cfg)
    vec = np.zeros(len(dims), dtype=np.int64)
    for i, (name, n) in enumerate(dims):
        if name in ("move", "attack_target", "use", "destroy", "give_item",
                    "give_target", "sell", "buy", "gold_target"):
            vec[i] = n - 1
    return vec


@dataclass
class ObsContext:
    """Per-agent, per-tick decode context captured when the obs was built."""

    agent_id: int
    entity_ids: list = field(default_factory=list)
    market_ids: list = field(default_factory=list)
    masks: dict = field(default_factory=dict)


def decode_and_validate(flat, ctx: ObsContext, cfg: GameConfig) -> ActionBundle:
    """Flat indices -> legal ActionBundle; masked-off choices become no-ops."""
    dims = action_dims(cfg)
    flat = np.asarray(flat, dtype=np.int64).reshape(-1)
    if flat.shape[0] != len(dims):
        raise OutOfRangeIndex(f"expected {len(dims)} action dims, got {flat.shape[0]}")
    values: dict[str, int] = {}
    for i, (name, n) in enumerate(dims):
        idx = int(flat[i])
        if idx < 0 or idx >= n:
            raise OutOfRangeIndex(f"{name} index {idx} not in [0,{n})")
        mask = ctx.masks[name]
        if not mask[idx]:
            idx = None
        values[name] = idx

    bundle = ActionBundle()
    bundle.move = values["move"] if values["move"] is not None else NOOP_MOVE

    def entity_at(row):
        if row is None or row >= len(ctx.entity_ids):
            return None
        return ctx.entity_ids[row]

    target = entity_at(values["attack_target"]) \
        if values["attack_target"] is not None \
        and values["attack_target"] < ENTITY_ROWS else None
    if target is not None and values["attack_style"] is not None:
        bundle.attack_style = values["attack_style"]
        bundle.attack_target = target
    if values["comm_token"] is not None:
        bundle.comm_token = values["comm_token"] + 1  # tokens are 1..127

    if cfg.profile == "full":
        capacity = cfg.effective("ITEM_INVENTORY_CAPACITY")
        for key, attr in (("use", "use_slot"), ("destroy", "destroy_slot")):
            idx = values[key]
            if idx is not None and idx < capacity:
                setattr(bundle, attr, idx)
        give_row = values["give_target"]
        if values["give_item"] is not None and values["give_item"] < capacity \
                and give_row is not None and give_row < ENTITY_ROWS:
            target = entity_at(give_row)
            if target is not None:
                bundle.give_slot = values["give_item"]
                bundle.give_target = target
        if values["sell"] is not None and values["sell"] < capacity \
                and values["sell_price"] is not None:
            bundle.sell_slot = values["sell"]
            bundle.sell_price = values["sell_price"] + 1  # prices are 1..99
        buy_row = values["buy"]
        if buy_row is not None and buy_row < len(ctx.market_ids):
            bundle.buy_listing = ctx.market_ids[buy_row]
        gold_row = values["gold_target"]
        if gold_row is not None and gold_row < ENTITY_ROWS \
                and values["gold_amount"] is not None:
            target = entity_at(gold_row)
            if target is not None:
                bundle.gold_target = target
                bundle.gold_amount = values["gold_amount"] + 1
    return bundle


# --- observation building ------------------------------------------------------------


def xp_bucket(entity, skill: Skill, cfg: GameConfig) -> float:
    """Progress toward the next level, quantized to 0.1 steps."""
    thresholds = cfg.effective("PROGRESSION_EXP_THRESHOLD")
    level = entity.level(skill)
    if level >= len(thresholds):
        return 1.0
    lo = thresholds[level - 1]
    hi = thresholds[level]
    xp = entity.xp.get(skill, 0)
    frac = (xp - lo) / (hi - lo) if hi > lo else 0.0
    return min(1.0, max(0.0, int(frac * 10) / 10.0))


_KIND_CODE = {EntityKind.PLAYER: 1, EntityKind.PASSIVE_NPC: 2,
              EntityKind.NEUTRAL_NPC: 3, EntityKind.AGGRESSIVE_NPC: 4}


class ObsBuilder:
    """Shared per-tick feature layers plus per-agent window assembly."""

    def __init__(self, state):
        self.state = state
        self.cfg = state.cfg
        self.layout = ObservationLayout(self.cfg)
        side = state.tile_map.side
        self._tile = np.zeros((side, side, TILE_FEATURES), dtype=np.float32)
        rr = np.arange(side, dtype=np.float32)
        self._tile[:, :, TF_ROW] = (rr / side)[:, None]
        self._tile[:, :, TF_COL] = (rr / side)[None, :]
        self._tile[:, :, TF_MATERIAL] = state.tile_map.materials / 10.0
        self._inv_capacity = (
            1.0 / np.maximum(state.tile_map.capacity, 1)).astype(np.float32)
        self._inv_capacity[state.tile_map.capacity == 0] = 0.0
        self._occ = np.zeros((side, side), dtype=np.float32)
        self._features_tick = -1
        self._positions_tick = -1
        self._radius = self.cfg.effective("PLAYER_VISION_RADIUS")
        self._ids = np.zeros(0, dtype=np.int64)
        self._rows = np.zeros(0, dtype=np.int64)
        self._cols = np.zeros(0, dtype=np.int64)
        self._entity_list: list = []
        self._entity_feat = np.zeros((0, ENTITY_FEATURES), dtype=np.float32)
        self._market_rows: list = []
        self._market_feat = np.zeros((0, ITEM_FEATURES), dtype=np.float32)

    # -- shared refresh --------------------------------------------------

    def refresh_positions(self) -> None:
        """Cheap per-tick cache: living entity ids, coordinates, team data."""
        if self._positions_tick == self.state.tick:
            return
        self._positions_tick = self.state.tick
        living = [e for e in self.state.entities.values() if e.alive]
        living.sort(key=lambda e: e.id)
        self._entity_list = living
        self._ids = np.asarray([e.id for e in living], dtype=np.int64)
        self._rows = np.asarray([e.pos[0] for e in living], dtype=np.int64)
        self._cols = np.asarray([e.pos[1] for e in living], dtype=np.int64)
        self._teams = np.asarray([-1 if e.team is None else e.team
                                  for e in living], dtype=np.int64)
        self._immunity = np.asarray([e.immunity_until for e in living],
                                    dtype=np.int64)
        self._players = np.asarray([e.is_player for e in living], dtype=bool)

    def _refresh_features(self) -> None:
        if self._features_tick == self.state.tick:
            return
        self._features_tick = self.state.tick
        self.refresh_positions()
        state = self.state
        cfg = self.cfg
        tile_map = state.tile_map
        side = tile_map.side

        self._occ.fill(0.0)
        for e in reversed(self._entity_list):  # lowest id wins a shared tile
            self._occ[e.pos] = _KIND_CODE[e.kind] / 4.0
        self._tile[:, :, TF_OCCUPANT] = self._occ
        self._tile[:, :, TF_RESOURCE] = tile_map.harvests * self._inv_capacity
        if cfg.effective("PROVIDE_DEATH_FOG_OBS"):
            self._tile[:, :, TF_FOG] = np.minimum(
                state.fog_grid, FOG_NORM) / FOG_NORM
        self._tile[:, :, TF_HARVESTABLE] = (
            (tile_map.harvests > 0) & (tile_map.capacity > 0)).astype(np.float32)

        horizon = max(1, cfg.effective("HORIZON"))
        duration = max(1, cfg.effective("COMBAT_STATUS_DURATION"))
        immunity = max(1, cfg.effective("COMBAT_SPAWN_IMMUNITY"))
        equipment_on = cfg.enabled(Subsystem.EQUIPMENT)
        progression_on = cfg.enabled(Subsystem.PROGRESSION)
        thresholds = cfg.effective("PROGRESSION_EXP_THRESHOLD")
        n_levels = len(thresholds)
        tick = state.tick

        def bucket(levels, xps, idx) -> float:
            if not progression_on:
                return 0.0
            level = levels[idx]
            if level >= n_levels:
                return 1.0
            lo, hi = thresholds[level - 1], thresholds[level]
            if hi <= lo:
                return 0.0
            frac = (xps[idx] - lo) / (hi - lo)
            return min(1.0, max(0.0, int(frac * 10) / 10.0))

        # One plain-python tuple per entity, then a single asarray: an order
        # of magnitude cheaper than per-field numpy writes.
        fog_at = state.fog_grid[self._rows, self._cols].tolist() \
            if len(self._rows) else []
        raw = []
        for i, e in enumerate(self._entity_list):
            offense, defense = (economy.equipment_stats(e, cfg)
                                if equipment_on else (0, 0))
            lv = e.level_row  # SKILL_ORDER: the 3 styles then 5 professions
            xps = e.xp_row
            raw.append((
                e.id, _KIND_CODE[e.kind], 0.0, 0.0, e.last_attacker,
                e.latest_token, e.pos[0], e.pos[1],
                min(horizon, tick - e.spawn_tick), e.health / e.max_health,
                e.food / e.max_resource, e.water / e.max_resource,
                lv[0], bucket(lv, xps, 0), lv[1], bucket(lv, xps, 1),
                lv[2], bucket(lv, xps, 2),
                lv[3], lv[4], lv[5], lv[6], lv[7],
                e.gold, offense, defense,
                max(0, e.in_combat_until - tick), max(0, e.immunity_until - tick),
                min(fog_at[i], FOG_NORM),
                min(1.0, e.damage_taken_last_tick / e.max_health), 0.0,
            ))
        feat = np.asarray(raw, dtype=np.float32).reshape(-1, ENTITY_FEATURES)
        scale = np.ones(ENTITY_FEATURES, dtype=np.float32)
        scale[[EF_ID, EF_ATTACKER]] = 1 / ID_NORM
        scale[EF_KIND] = 1 / 4.0
        scale[EF_TOKEN] = 1 / 127.0
        scale[[EF_ROW, EF_COL]] = 1 / side
        scale[EF_TIME_ALIVE] = 1 / horizon
        level_cols = [EF_MELEE_LVL, EF_RANGE_LVL, EF_MAGE_LVL, EF_FISHING,
                      EF_HERBALISM, EF_PROSPECTING, EF_CARVING, EF_ALCHEMY]
        scale[level_cols] = 1 / 10.0
        scale[EF_GOLD] = 1 / GOLD_NORM
        scale[[EF_OFFENSE, EF_DEFENSE]] = 1 / STAT_NORM
        scale[EF_COMBAT_STATUS] = 1 / duration
        scale[EF_IMMUNITY] = 1 / immunity
        scale[EF_FOG] = 1 / FOG_NORM
        self._entity_feat = feat * scale[None, :]

        if cfg.profile == "full":
            duration_l = max(1, cfg.effective("EXCHANGE_LISTING_DURATION"))
            listings = state.market.active()[:cfg.effective("MARKET_N_OBS")]
            self._market_rows = listings
            market = np.zeros((len(listings), ITEM_FEATURES), dtype=np.float32)
            for i, listing in enumerate(listings):
                market[i] = _item_features(listing.item, cfg)
                market[i, 6] = listing.price / cfg.effective("PRICE_N_OBS")
                market[i, 7] = max(0, listing.expiry - state.tick) / duration_l
                market[i, 8] = listing.seller / ID_NORM
            self._market_feat = market

    # -- per-agent -----------------------------------------------------------

    def nearest_rows(self, entity) -> tuple[np.ndarray, np.ndarray]:
        """Nearest ENTITY_ROWS cache indices ordered by (distance, id)."""
        self.refresh_positions()
        d = np.maximum(np.abs(self._rows - entity.pos[0]),
                       np.abs(self._cols - entity.pos[1]))
        order = np.lexsort((self._ids, d))
        if len(order) > ENTITY_ROWS:
            order = order[:ENTITY_ROWS]
        return order, d[order]

    def masks_and_context(self, entity, rows: np.ndarray,
                          dist: np.ndarray) -> ObsContext:
        state = self.state
        cfg = self.cfg
        ctx = ObsContext(agent_id=entity.id)
        ctx.entity_ids = self._ids[rows].tolist()
        masks: dict[str, np.ndarray] = {}
        dims = dict(action_dims(cfg))
        sel_ids = self._ids[rows]
        sel_teams = self._teams[rows]
        my_team = -1 if entity.team is None else entity.team

        move = np.zeros(dims["move"], dtype=bool)
        if entity.alive:
            for idx in legal_moves(entity, state.tile_map, cfg):
                move[idx] = True
        move[NOOP_MOVE] = True
        masks["move"] = move

        combat_on = cfg.enabled(Subsystem.COMBAT) and entity.alive
        style = np.zeros(dims["attack_style"], dtype=bool)
        if combat_on:
            if cfg.effective("COMBAT_ALLOW_FLEXIBLE_STYLE"):
                style[:] = True
            else:
                style[STYLES.index(entity.best_style())] = True
        masks["attack_style"] = style

        target = np.zeros(dims["attack_target"], dtype=bool)
        target[-1] = True
        if combat_on and style.any():
            reach = max(style_reach(s, cfg) for s, on in zip(STYLES, style) if on)
            ok = (dist <= reach) & (sel_ids != entity.id) \
                & (self._immunity[rows] <= state.tick)
            if state.is_team_game and my_team >= 0:
                ok &= sel_teams != my_team
            target[:len(rows)] = ok
        masks["attack_target"] = target

        comm = np.zeros(dims["comm_token"], dtype=bool)
        if cfg.enabled(Subsystem.COMMUNICATION) and entity.alive:
            comm[:] = True
        masks["comm_token"] = comm

        if cfg.profile == "full":
            capacity = cfg.effective("ITEM_INVENTORY_CAPACITY")
            item_on = cfg.enabled(Subsystem.ITEM) and entity.alive
            exchange_on = cfg.enabled(Subsystem.EXCHANGE) and entity.alive
            gift_on = item_on and cfg.effective("ITEM_ALLOW_GIFT")

            use = np.zeros(capacity + 1, dtype=bool)
            destroy = np.zeros(capacity + 1, dtype=bool)
            give = np.zeros(capacity + 1, dtype=bool)
            sell = np.zeros(capacity + 1, dtype=bool)
            use[-1] = destroy[-1] = give[-1] = sell[-1] = True
            if item_on:
                for i, item in enumerate(entity.inventory[:capacity]):
                    if item.listed_price is not None:
                        continue
                    gate = economy._gate_level(entity, item)
                    if gate >= item.level:
                        use[i] = True
                    if not item.equipped:
                        destroy[i] = True
                        give[i] = gift_on
                        sell[i] = exchange_on
            masks["use"] = use
            masks["destroy"] = destroy
            masks["give_item"] = give
            masks["sell"] = sell

            give_target = np.zeros(ENTITY_ROWS + 1, dtype=bool)
            give_target[-1] = True
            gold_target = give_target.copy()
            if gift_on:
                ok = self._players[rows] & (sel_ids != entity.id)
                if state.is_team_game:
                    ok &= sel_teams == my_team
                give_target[:len(rows)] = ok
                if exchange_on and entity.gold > 0:
                    gold_target[:len(rows)] = ok
            masks["give_target"] = give_target
            masks["gold_target"] = gold_target

            price_n = cfg.effective("PRICE_N_OBS")
            price = np.zeros(price_n, dtype=bool)
            if exchange_on:
                price[:] = True
            masks["sell_price"] = price
            amount = np.zeros(price_n, dtype=bool)
            if exchange_on and entity.gold > 0:
                amount[:min(entity.gold, price_n)] = True
            masks["gold_amount"] = amount

            self._refresh_features()
            buy = np.zeros(dims["buy"], dtype=bool)
            buy[-1] = True
            if exchange_on:
                space = len(entity.inventory) < capacity
                for i, listing in enumerate(self._market_rows):
                    if listing.seller == entity.id or listing.price > entity.gold:
                        continue
                    if not space and not any(
                            held.type == listing.item.type
                            and held.level == listing.item.level
                            and held.type in economy.STACKABLE
                            and held.listed_price is None
                            for held in entity.inventory):
                        continue
                    buy[i] = True
            masks["buy"] = buy
            ctx.market_ids = [l.listing_id for l in self._market_rows]
        ctx.masks = masks
        return ctx

    def build(self, agent_id: int, want_features: bool = True):
        """(flat obs or None, ObsContext) for one agent.

        Dead agents get a zeroed observation whose masks expose only no-ops.
        """
        state = self.state
        entity = state.entities.get(agent_id)
        if entity is None or not entity.is_player:
            raise UnknownAgent(str(agent_id))
        if not entity.alive:
            return self._dead_view(agent_id, want_features)

        rows, dist = self.nearest_rows(entity)
        ctx = self.masks_and_context(entity, rows, dist)
        if not want_features:
            return None, ctx
        self._refresh_features()

        cfg = self.cfg
        layout = self.layout
        obs = np.zeros(layout.total, dtype=np.float32)
        layout.slice(obs, "tick")[0] = state.tick / max(1, cfg.effective("HORIZON"))
        layout.slice(obs, "agent_id")[0] = agent_id / ID_NORM
        layout.slice(obs, "task")[:] = state.task_embedding(agent_id)

        r, c = entity.pos
        rad = self._radius
        window = self._tile[r - rad:r + rad + 1, c - rad:c + rad + 1, :]
        layout.slice(obs, "tile")[:] = window.reshape(-1, TILE_FEATURES)

        ent = layout.slice(obs, "entity")
        take = min(len(rows), ENTITY_ROWS)
        sel = rows[:take]
        ent[:take] = self._entity_feat[sel]
        ent[:take, EF_SELF] = self._ids[sel] == agent_id
        if state.is_team_game and entity.team is not None:
            ent[:take, EF_SAME_TEAM] = self._teams[sel] == entity.team
            leader_id = state.key_target_id(entity)
            if leader_id is not None:
                ent[:take, EF_KEY_TARGET] = self._ids[sel] == leader_id

        comm = layout.slice(obs, "comm")
        if cfg.enabled(Subsystem.COMMUNICATION) and entity.team is not None:
            mates = state.team_members(entity.team)
            side = state.tile_map.side
            i = 0
            for mate_id in mates:
                if mate_id == agent_id or i >= comm.shape[0]:
                    continue
                mate = state.entities[mate_id]
                if not mate.alive:
                    continue
                comm[i, 0] = mate.id / ID_NORM
                comm[i, 1] = mate.pos[0] / side
                comm[i, 2] = mate.pos[1] / side
                comm[i, 3] = mate.latest_token / 127.0
                i += 1

        if cfg.profile == "full":
            inv = layout.slice(obs, "inventory")
            for i, item in enumerate(entity.inventory[:inv.shape[0]]):
                inv[i] = _item_features(item, cfg)
            market = layout.slice(obs, "market")
            take_m = min(len(self._market_feat), market.shape[0])
            if take_m:
                market[:take_m] = self._market_feat[:take_m]
                for i, listing in enumerate(self._market_rows[:take_m]):
                    if listing.seller == agent_id:
                        market[i, 9] = 1.0

        self._write_masks(obs, ctx)
        return obs, ctx

    def _write_masks(self, obs: np.ndarray, ctx: ObsContext) -> None:
        for name, mask in ctx.masks.items():
            self.layout.slice(obs, f"mask_{name}")[:] = mask

    def _dead_view(self, agent_id: int, want_features: bool):
        """Zeroed observation with noop-only masks; cached, it never varies."""
        if not hasattr(self, "_dead_masks"):
            self._dead_masks = {}
            for name, n in action_dims(self.cfg):
                mask = np.zeros(n, dtype=bool)
                if name in ("move", "attack_target", "use", "destroy",
                            "give_item", "give_target", "sell", "buy",
                            "gold_target"):
                    mask[-1] = True
                mask.setflags(write=False)
                self._dead_masks[name] = mask
            self._dead_obs = np.zeros(self.layout.total, dtype=np.float32)
            ctx = ObsContext(agent_id=0)
            ctx.masks = self._dead_masks
            self._write_masks(self._dead_obs, ctx)
            self._dead_obs.setflags(write=False)
        ctx = ObsContext(agent_id=agent_id)
        ctx.masks = self._dead_masks
        return (self._dead_obs if want_features else None), ctx

    # -- batched assembly ---------------------------------------------------

    def build_batch(self, agent_ids: list[int], want_features: bool = True):
        """Assemble observations for many agents in one vectorized pass.

        Semantically identical to calling ``build`` per agent (asserted in
        tests); one order of magnitude fewer numpy dispatches.
        """
        state = self.state
        cfg = self.cfg
        layout = self.layout
        out: dict[int, tuple] = {}
        living = [a for a in agent_ids if state.entities[a].alive]
        dead = [a for a in agent_ids if not state.entities[a].alive]
        for agent_id in dead:
            out[agent_id] = self.build(agent_id, want_features)
        if not living:
            return out
        self.refresh_positions()
        if want_features:
            self._refresh_features()

        agents = [state.entities[a] for a in living]
        n = len(agents)
        a_ids = np.asarray(living, dtype=np.int64)
        a_row = np.asarray([e.pos[0] for e in agents], dtype=np.int64)
        a_col = np.asarray([e.pos[1] for e in agents], dtype=np.int64)
        a_team = np.asarray([-1 if e.team is None else e.team for e in agents],
                            dtype=np.int64)

        # Nearest-entity selection, batched: composite key distance-then-id.
        d = np.maximum(np.abs(a_row[:, None] - self._rows[None, :]),
                       np.abs(a_col[:, None] - self._cols[None, :]))
        key = d * 2048 + (self._ids[None, :] + 1024)
        E = d.shape[1]
        take = min(E, ENTITY_ROWS)
        if E > ENTITY_ROWS:
            part = np.argpartition(key, ENTITY_ROWS, axis=1)[:, :ENTITY_ROWS]
            order = np.take_along_axis(key, part, axis=1).argsort(axis=1)
            sel = np.take_along_axis(part, order, axis=1)
        else:
            sel = key.argsort(axis=1)
        sel_ids = self._ids[sel]
        sel_d = np.take_along_axis(d, sel, axis=1)
        sel_teams = self._teams[sel]
        sel_imm = self._immunity[sel]
        sel_players = self._players[sel]

        masks_batch: dict[str, np.ndarray] = {}
        dims = dict(action_dims(cfg))
        combat_on = cfg.enabled(Subsystem.COMBAT)
        flexible = cfg.effective("COMBAT_ALLOW_FLEXIBLE_STYLE")

        style = np.zeros((n, dims["attack_style"]), dtype=bool)
        if combat_on:
            if flexible:
                style[:] = True
            else:
                for i, e in enumerate(agents):
                    style[i, STYLES.index(e.best_style())] = True
        masks_batch["attack_style"] = style

        target = np.zeros((n, dims["attack_target"]), dtype=bool)
        target[:, -1] = True
        if combat_on:
            reach = max(style_reach(s, cfg) for s in STYLES) if flexible else 0
            if not flexible:
                reach_by_agent = np.asarray(
                    [style_reach(e.best_style(), cfg) for e in agents])[:, None]
            else:
                reach_by_agent = np.full((n, 1), reach)
            ok = (sel_d <= reach_by_agent) & (sel_ids != a_ids[:, None]) \
                & (sel_imm <= state.tick)
            if state.is_team_game:
                ok &= ~((sel_teams == a_team[:, None]) & (a_team[:, None] >= 0))
            target[:, :take] = ok
        masks_batch["attack_target"] = target

        from .entities import free_move_grid, move_options_batch, passable_grid
        passable = getattr(state, "passable_static", None)
        if passable is None:
            passable = passable_grid(state.tile_map)
        free = free_move_grid(state.tile_map, passable,
                              cfg.effective("ALLOW_MOVE_INTO_OCCUPIED_TILE"))
        move = np.ones((n, dims["move"]), dtype=bool)
        move[:, :4] = move_options_batch(a_row, a_col, free)
        masks_batch["move"] = move

        comm = np.zeros((n, dims["comm_token"]), dtype=bool)
        if cfg.enabled(Subsystem.COMMUNICATION):
            comm[:] = True
        masks_batch["comm_token"] = comm

        if cfg.profile == "full":
            self._full_masks_batch(agents, a_ids, a_team, sel_ids, sel_teams,
                                   sel_players, take, masks_batch)

        contexts = []
        market_ids = [l.listing_id for l in self._market_rows] \
            if cfg.profile == "full" else []
        for i, agent_id in enumerate(living):
            ctx = ObsContext(agent_id=agent_id)
            ctx.entity_ids = sel_ids[i]
            ctx.masks = {name: arr[i] for name, arr in masks_batch.items()}
            ctx.market_ids = market_ids
            contexts.append(ctx)

        if not want_features:
            for i, agent_id in enumerate(living):
                out[agent_id] = (None, contexts[i])
            return out

        obs = np.zeros((n, layout.total), dtype=np.float32)

        def block(name):
            entry = layout.entries[name]
            return obs[:, entry.offset:entry.offset + entry.size]

        block("tick")[:, 0] = state.tick / max(1, cfg.effective("HORIZON"))
        block("agent_id")[:, 0] = a_ids / ID_NORM
        block("task")[:] = state.task_embedding_matrix(living)

        rad = self._radius
        offsets = np.arange(-rad, rad + 1)
        win_r = a_row[:, None, None] + offsets[None, :, None]
        win_c = a_col[:, None, None] + offsets[None, None, :]
        windows = self._tile[win_r, win_c]  # (n, 15, 15, 7)
        block("tile")[:] = windows.reshape(n, -1)

        ent_block = block("entity").reshape(n, ENTITY_ROWS, ENTITY_FEATURES)
        ent_block[:, :take] = self._entity_feat[sel]
        ent_block[:, :take, EF_SELF] = sel_ids == a_ids[:, None]
        if state.is_team_game:
            ent_block[:, :take, EF_SAME_TEAM] = \
                (sel_teams == a_team[:, None]) & (a_team[:, None] >= 0)
            leaders = np.asarray(
                [state.key_target_id(e) or 0 for e in agents], dtype=np.int64)
            ent_block[:, :take, EF_KEY_TARGET] = \
                (sel_ids == leaders[:, None]) & (leaders[:, None] != 0)

        comm_block = block("comm").reshape(n, -1, COMM_FEATURES)
        if cfg.enabled(Subsystem.COMMUNICATION) and state.is_team_game:
            side = state.tile_map.side
            limit = comm_block.shape[1]
            team_rows: dict[int, tuple] = {}
            for i, e in enumerate(agents):
                if e.team is None:
                    continue
                if e.team not in team_rows:
                    mates = [state.entities[m] for m in state.team_members(e.team)
                             if state.entities[m].alive]
                    matrix = np.asarray(
                        [(m.id / ID_NORM, m.pos[0] / side, m.pos[1] / side,
                          m.latest_token / 127.0) for m in mates],
                        dtype=np.float32).reshape(-1, COMM_FEATURES)
                    team_rows[e.team] = (np.asarray([m.id for m in mates]), matrix)
                ids, matrix = team_rows[e.team]
                others = matrix[ids != e.id][:limit]
                comm_block[i, :len(others)] = others

        if cfg.profile == "full":
            inv_block = block("inventory").reshape(n, -1, ITEM_FEATURES)
            for i, e in enumerate(agents):
                for j, item in enumerate(e.inventory[:inv_block.shape[1]]):
                    inv_block[i, j] = _item_features(item, cfg)
            market_block = block("market").reshape(n, -1, ITEM_FEATURES)
            take_m = min(len(self._market_feat), market_block.shape[1])
            if take_m:
                market_block[:, :take_m] = self._market_feat[None, :take_m]
                sellers = np.asarray([l.seller for l in self._market_rows[:take_m]])
                market_block[:, :take_m, 9] = sellers[None, :] == a_ids[:, None]

        for name, arr in masks_batch.items():
            entry = layout.entries[f"mask_{name}"]
            obs[:, entry.offset:entry.offset + entry.size] = arr

        for i, agent_id in enumerate(living):
            out[agent_id] = (obs[i], contexts[i])
        return out

    def _full_masks_batch(self, agents, a_ids, a_team, sel_ids, sel_teams,
                          sel_players, take, masks_batch) -> None:
        state = self.state
        cfg = self.cfg
        n = len(agents)
        capacity = cfg.effective("ITEM_INVENTORY_CAPACITY")
        item_on = cfg.enabled(Subsystem.ITEM)
        exchange_on = cfg.enabled(Subsystem.EXCHANGE)
        gift_on = item_on and cfg.effective("ITEM_ALLOW_GIFT")
        price_n = cfg.effective("PRICE_N_OBS")

        use = np.zeros((n, capacity + 1), dtype=bool)
        destroy = np.zeros((n, capacity + 1), dtype=bool)
        give = np.zeros((n, capacity + 1), dtype=bool)
        sell = np.zeros((n, capacity + 1), dtype=bool)
        use[:, -1] = destroy[:, -1] = give[:, -1] = sell[:, -1] = True
        if item_on:
            for i, e in enumerate(agents):
                for j, item in enumerate(e.inventory[:capacity]):
                    if item.listed_price is not None:
                        continue
                    if economy._gate_level(e, item) >= item.level:
                        use[i, j] = True
                    if not item.equipped:
                        destroy[i, j] = True
                        give[i, j] = gift_on
                        sell[i, j] = exchange_on
        masks_batch["use"] = use
        masks_batch["destroy"] = destroy
        masks_batch["give_item"] = give
        masks_batch["sell"] = sell

        gold = np.asarray([e.gold for e in agents], dtype=np.int64)
        give_target = np.zeros((n, ENTITY_ROWS + 1), dtype=bool)
        give_target[:, -1] = True
        gold_target = give_target.copy()
        if gift_on:
            ok = sel_players & (sel_ids != a_ids[:, None])
            if state.is_team_game:
                ok &= sel_teams == a_team[:, None]
            give_target[:, :take] = ok
            gold_target[:, :take] = ok & (gold[:, None] > 0)
        masks_batch["give_target"] = give_target
        masks_batch["gold_target"] = gold_target

        price = np.zeros((n, price_n), dtype=bool)
        if exchange_on:
            price[:] = True
        masks_batch["sell_price"] = price
        amount = np.zeros((n, price_n), dtype=bool)
        if exchange_on:
            amount[:] = np.arange(price_n)[None, :] < np.minimum(gold, price_n)[:, None]
        masks_batch["gold_amount"] = amount

        self._refresh_features()
        buy = np.zeros((n, cfg.effective("MARKET_N_OBS") + 1), dtype=bool)
        buy[:, -1] = True
        if exchange_on and self._market_rows:
            sellers = np.asarray([l.seller for l in self._market_rows])
            prices = np.asarray([l.price for l in self._market_rows])
            ok = (sellers[None, :] != a_ids[:, None]) \
                & (prices[None, :] <= gold[:, None])
            plain_space = np.asarray([len(e.inventory) < capacity
                                      for e in agents])
            for i, e in enumerate(agents):
                if plain_space[i]:
                    continue
                for j, listing in enumerate(self._market_rows):
                    if ok[i, j] and not any(
                            held.type is listing.item.type
                            and held.level == listing.item.level
                            and held.type in economy.STACKABLE
                            and held.listed_price is None
                            for held in e.inventory):
                        ok[i, j] = False
            buy[:, :len(self._market_rows)] = ok
        masks_batch["buy"] = buy


def _item_features(item, cfg: GameConfig) -> np.ndarray:
    row = np.zeros(ITEM_FEATURES, dtype=np.float32)
    cls = item_class(item.type)
    row[0] = 1.0
    row[1] = item.type.value / 16.0
    row[2] = item.level / 10.0
    row[3] = min(1.0, item.quantity / 10.0)
    row[4] = 1.0 if item.equipped else 0.0
    row[5] = 1.0 if item.listed_price is not None else 0.0
    if item.listed_price is not None:
        row[6] = item.listed_price / cfg.effective("PRICE_N_OBS")
    row[10] = 1.0 if cls == "weapon" else 0.0
    row[11] = 1.0 if cls == "armor" else 0.0
    row[12] = 1.0 if cls == "tool" else 0.0
    row[13] = 1.0 if cls == "ammo" else 0.0
    row[14] = 1.0 if cls == "consumable" else 0.0
    skill = matching_skill(item.type)
    row[15] = (STYLES.index(AMMO_STYLE[item.type]) + 1) / 4.0 \
        if item.type in AMMO_STYLE else (0.5 if skill else 0.0)
    return row
