"""Items, equipment, profession harvesting, and the global exchange.

These are the Full-profile subsystems.  Functions here operate on entity
objects duck-typed from ``entities.Entity`` and return the events they emit;
the engine owns orchestration and tile/drop bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from . import worldgen
from .config import GameConfig
from .errors import EmptySlot, InsufficientGold, InventoryFull, LevelTooLow, WrongTile
from .events import EventType, GameEvent


class Skill(Enum):
    MELEE = "Melee"
    RANGE = "Range"
    MAGE = "Mage"
    FISHING = "Fishing"
    HERBALISM = "Herbalism"
    PROSPECTING = "Prospecting"
    CARVING = "Carving"
    ALCHEMY = "Alchemy"


COMBAT_SKILLS = (Skill.MELEE, Skill.RANGE, Skill.MAGE)
HARVEST_SKILLS = (Skill.FISHING, Skill.HERBALISM, Skill.PROSPECTING,
                  Skill.CARVING, Skill.ALCHEMY)


class ItemType(Enum):
    HAT = 0
    TOP = 1
    BOTTOM = 2
    SPEAR = 3
    BOW = 4
    WAND = 5
    AXE = 6
    GLOVES = 7
    ROD = 8
    PICKAXE = 9
    CHISEL = 10
    WHETSTONE = 11
    ARROW = 12
    RUNES = 13
    RATION = 14
    POTION = 15


ARMOR_SLOTS = {ItemType.HAT: "hat", ItemType.TOP: "top", ItemType.BOTTOM: "bottom"}
WEAPON_STYLE = {ItemType.SPEAR: Skill.MELEE, ItemType.BOW: Skill.RANGE,
                ItemType.WAND: Skill.MAGE}
AMMO_STYLE = {ItemType.WHETSTONE: Skill.MELEE, ItemType.ARROW: Skill.RANGE,
              ItemType.RUNES: Skill.MAGE}
TOOL_SKILL = {ItemType.AXE: Skill.CARVING, ItemType.GLOVES: Skill.HERBALISM,
              ItemType.ROD: Skill.FISHING, ItemType.PICKAXE: Skill.PROSPECTING,
              ItemType.CHISEL: Skill.ALCHEMY}
CONSUMABLE_SKILL = {ItemType.RATION: Skill.FISHING, ItemType.POTION: Skill.HERBALISM}

STYLE_WEAPON = {style: item for item, style in WEAPON_STYLE.items()}
STYLE_AMMO = {style: item for item, style in AMMO_STYLE.items()}

STACKABLE = frozenset(AMMO_STYLE) | frozenset(CONSUMABLE_SKILL)


def item_class(item_type: ItemType) -> str:
    if item_type in ARMOR_SLOTS:
        return "armor"
    if item_type in WEAPON_STYLE:
        return "weapon"
    if item_type in TOOL_SKILL:
        return "tool"
    if item_type in AMMO_STYLE:
        return "ammo"
    return "consumable"


def slot_of(item_type: ItemType) -> str | None:
    """Equipment slot name, or None for consumables."""
    cls = item_class(item_type)
    if cls == "armor":
        return ARMOR_SLOTS[item_type]
    if cls in ("weapon", "tool", "ammo"):
        return cls
    return None


def matching_skill(item_type: ItemType) -> Skill | None:
    """Skill gating the item's level; None means any skill qualifies."""
    if item_type in WEAPON_STYLE:
        return WEAPON_STYLE[item_type]
    if item_type in AMMO_STYLE:
        return AMMO_STYLE[item_type]
    if item_type in TOOL_SKILL:
        return TOOL_SKILL[item_type]
    if item_type in CONSUMABLE_SKILL:
        return CONSUMABLE_SKILL[item_type]
    return None  # armor


@dataclass
class Item:
    type: ItemType
    level: int = 1
    quantity: int = 1
    equipped: bool = False
    listed_price: int | None = None


# Profession harvesting: tile material -> (skill, yielded item).
HARVEST_TABLE = {
    worldgen.ORE: (Skill.PROSPECTING, ItemType.WHETSTONE),
    worldgen.TREE: (Skill.CARVING, ItemType.ARROW),
    worldgen.CRYSTAL: (Skill.ALCHEMY, ItemType.RUNES),
    worldgen.HERB: (Skill.HERBALISM, ItemType.POTION),
    worldgen.FISH: (Skill.FISHING, ItemType.RATION),
}
AMMO_PROFESSIONS = frozenset({Skill.PROSPECTING, Skill.CARVING, Skill.ALCHEMY})


def harvest_item_level(skill_level: int) -> int:
    """Yielded item level scales with the harvesting skill."""
    return min(10, math.ceil(skill_level / 3))


def _gate_level(entity, item: Item) -> int:
    skill = matching_skill(item.type)
    if skill is None:
        return max(entity.level(s) for s in Skill)
    return entity.level(skill)


def add_to_inventory(entity, item: Item, cfg: GameConfig) -> bool:
    """Stack or append; False when the inventory is full."""
    if item.type in STACKABLE:
        for held in entity.inventory:
            if held.type == item.type and held.level == item.level \
                    and held.listed_price is None:
                held.quantity += item.quantity
                return True
    if len(entity.inventory) >= cfg.effective("ITEM_INVENTORY_CAPACITY"):
        return False
    entity.inventory.append(item)
    return True


def unequip_slot(entity, slot: str, tick: int) -> list[GameEvent]:
    """Unequip whatever occupies a slot; emits quantity=0 EQUIP_ITEM."""
    out = []
    for held in entity.inventory:
        if held.equipped and slot_of(held.type) == slot:
            held.equipped = False
            out.append(GameEvent(tick, entity.id, EventType.EQUIP_ITEM,
                                 item=held.type.value, level=held.level, quantity=0))
    return out


def use_item(entity, slot: int, cfg: GameConfig, tick: int) -> list[GameEvent]:
    """Equip/unequip equipment or consume a consumable from one slot.

    Raises EmptySlot / LevelTooLow; callers that came through the action mask
    treat those as codec violations.
    """
    if slot < 0 or slot >= len(entity.inventory):
        raise EmptySlot(f"slot {slot}")
    item = entity.inventory[slot]
    if item.listed_price is not None:
        raise EmptySlot("item is listed for sale")
    if _gate_level(entity, item) < item.level:
        raise LevelTooLow(f"{item.type.name} level {item.level}")

    if item_class(item.type) == "consumable":
        restore = cfg.effective("PROFESSION_CONSUMABLE_RESTORE")
        if item.type is ItemType.RATION:
            entity.food = min(entity.max_resource, entity.food + restore)
            entity.water = min(entity.max_resource, entity.water + restore)
        else:  # potion
            entity.health = min(entity.max_health, entity.health + restore)
        item.quantity -= 1
        if item.quantity <= 0:
            entity.inventory.pop(slot)
        return [GameEvent(tick, entity.id, EventType.CONSUME_ITEM,
                          item=item.type.value, level=item.level, quantity=1)]

    out: list[GameEvent] = []
    if item.equipped:
        item.equipped = False
        out.append(GameEvent(tick, entity.id, EventType.EQUIP_ITEM,
                             item=item.type.value, level=item.level, quantity=0))
    else:
        out.extend(unequip_slot(entity, slot_of(item.type), tick))
        item.equipped = True
        out.append(GameEvent(tick, entity.id, EventType.EQUIP_ITEM,
                             item=item.type.value, level=item.level, quantity=1))
    return out


def equipped_in_slot(entity, slot: str) -> Item | None:
    for held in entity.inventory:
        if held.equipped and slot_of(held.type) == slot:
            return held
    return None


def equipment_stats(entity, cfg: GameConfig, style: Skill | None = None) -> tuple[int, int]:
    """(offense, defense) from equipped gear.

    Ammunition counts toward offense only when its style matches the attack
    style being evaluated; pass style=None for the style-independent view
    used in observations.
    """
    offense = defense = 0
    for held in entity.inventory:
        if not held.equipped:
            continue
        cls = item_class(held.type)
        if cls == "weapon":
            offense += cfg.effective("EQUIPMENT_WEAPON_BASE_DAMAGE") \
                + cfg.effective("EQUIPMENT_WEAPON_LEVEL_DAMAGE") * held.level
        elif cls == "ammo":
            if style is None or AMMO_STYLE[held.type] is style:
                offense += cfg.effective("EQUIPMENT_AMMUNITION_BASE_DAMAGE") \
                    + cfg.effective("EQUIPMENT_AMMUNITION_LEVEL_DAMAGE") * held.level
        elif cls == "armor":
            defense += cfg.effective("EQUIPMENT_ARMOR_BASE_DEFENSE") \
                + cfg.effective("EQUIPMENT_ARMOR_LEVEL_DEFENSE") * held.level
        elif cls == "tool":
            defense += cfg.effective("EQUIPMENT_TOOL_BASE_DEFENSE") \
                + cfg.effective("EQUIPMENT_TOOL_LEVEL_DEFENSE") * held.level
    return offense, defense


def fully_armed(entity, style: Skill, min_level: int) -> int:
    """How many of the four required pieces (weapon+hat+top+bottom) are on."""
    required = [STYLE_WEAPON[style], ItemType.HAT, ItemType.TOP, ItemType.BOTTOM]
    count = 0
    for want in required:
        for held in entity.inventory:
            if held.equipped and held.type is want and held.level >= min_level:
                count += 1
                break
    return count


def harvest_profession(entity, tile_map: worldgen.TileMap, rng, cfg: GameConfig,
                       tick: int, drops: dict) -> list[GameEvent]:
    """Harvest the profession tile under (or fish adjacent to) the entity.

    Yields the profession's item at level ceil(skill/3), grants XP, and may
    also yield the matching weapon for ammunition professions.  A full
    inventory drops the yield on the tile instead.
    """
    pos = entity.pos
    material = int(tile_map.materials[pos])
    if material in HARVEST_TABLE and tile_map.harvests[pos] > 0:
        source = pos
    else:
        source = None
        if material not in HARVEST_TABLE:
            r, c = pos
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    q = (r + dr, c + dc)
                    if int(tile_map.materials[q]) == worldgen.FISH \
                            and tile_map.harvests[q] > 0:
                        source = q
                        break
                if source:
                    break
        if source is None:
            raise WrongTile(f"nothing to harvest at {pos}")

    skill, item_type = HARVEST_TABLE[int(tile_map.materials[source])]
    tile_map.harvests[source] -= 1
    level = harvest_item_level(entity.level(skill))
    scale = "PROGRESSION_AMMUNITION_XP_SCALE" if skill in AMMO_PROFESSIONS \
        else "PROGRESSION_CONSUMABLE_XP_SCALE"
    entity.add_xp(skill, cfg.effective(scale), cfg)

    out = []
    yields = [Item(item_type, level=level)]
    if skill in AMMO_PROFESSIONS and rng.random() < cfg.effective("WEAPON_DROP_PROB"):
        yields.append(Item(STYLE_WEAPON[AMMO_STYLE[item_type]], level=level))
    for item in yields:
        out.append(GameEvent(tick, entity.id, EventType.HARVEST_ITEM,
                             item=item.type.value, level=item.level, quantity=1))
        if not add_to_inventory(entity, item, cfg):
            drops.setdefault(entity.pos, []).append((tick, item))
    return out


# --- market -----------------------------------------------------------------


@dataclass
class MarketListing:
    listing_id: int
    seller: int
    item: Item
    price: int
    expiry: int


@dataclass
class Market:
    """Global order book with immediate settlement and listing expiry."""

    listings: dict[int, MarketListing] = field(default_factory=dict)
    next_id: int = 1

    def active(self) -> list[MarketListing]:
        return [self.listings[k] for k in sorted(self.listings)]

    def list_item(self, seller_id: int, item: Item, price: int, tick: int,
                  duration: int) -> MarketListing:
        item.listed_price = price
        listing = MarketListing(self.next_id, seller_id, item, price, tick + duration)
        self.listings[self.next_id] = listing
        self.next_id += 1
        return listing

    def take(self, listing_id: int) -> MarketListing | None:
        listing = self.listings.pop(listing_id, None)
        if listing is not None:
            listing.item.listed_price = None
        return listing

    def expire(self, tick: int) -> list[MarketListing]:
        """Remove listings past expiry; caller returns items to sellers."""
        done = [l for l in self.active() if tick >= l.expiry]
        for listing in done:
            self.listings.pop(listing.listing_id)
            listing.item.listed_price = None
        return done


def settle_buy(buyer, seller, market: Market, listing_id: int, cfg: GameConfig,
               tick: int) -> list[GameEvent]:
    """Transfer gold buyer->seller and the escrowed item to the buyer."""
    listing = market.listings.get(listing_id)
    if listing is None:
        raise InsufficientGold("listing gone")  # masked upstream; defensive
    if buyer.gold < listing.price:
        raise InsufficientGold(f"{buyer.gold} < {listing.price}")
    item = listing.item
    probe = Item(item.type, item.level, item.quantity)
    if not add_to_inventory(buyer, probe, cfg):
        raise InventoryFull("buyer inventory full")
    market.take(listing_id)
    buyer.gold -= listing.price
    seller.gold += listing.price
    return [
        GameEvent(tick, buyer.id, EventType.BUY_ITEM, item=item.type.value,
                  level=item.level, gold=listing.price, target=seller.id),
        GameEvent(tick, seller.id, EventType.EARN_GOLD, gold=listing.price,
                  target=buyer.id),
    ]
