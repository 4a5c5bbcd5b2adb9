"""Append-only game event log with a line-delimited text serialization.

One event per line: ``tick TYPE subject [key=value ...]`` with payload keys
emitted in a fixed order, so serialized logs are byte-stable and hashable.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class EventType(Enum):
    EAT_FOOD = "EAT_FOOD"
    DRINK_WATER = "DRINK_WATER"
    SCORE_HIT = "SCORE_HIT"
    PLAYER_KILL = "PLAYER_KILL"
    DEFEAT_NPC = "DEFEAT_NPC"
    GO_FARTHEST = "GO_FARTHEST"
    HARVEST_ITEM = "HARVEST_ITEM"
    CONSUME_ITEM = "CONSUME_ITEM"
    EQUIP_ITEM = "EQUIP_ITEM"
    GIVE_ITEM = "GIVE_ITEM"
    DESTROY_ITEM = "DESTROY_ITEM"
    LIST_ITEM = "LIST_ITEM"
    BUY_ITEM = "BUY_ITEM"
    EARN_GOLD = "EARN_GOLD"
    GIVE_GOLD = "GIVE_GOLD"
    FIRE_AMMO = "FIRE_AMMO"
    SEIZE_TILE = "SEIZE_TILE"
    AGENT_DEATH = "AGENT_DEATH"


# Payload keys in their serialization order.
_PAYLOAD_KEYS = ("target", "item", "level", "quantity", "gold", "distance",
                 "row", "col", "style", "damage")


@dataclass(frozen=True, slots=True)
class GameEvent:
    """One thing that happened to one entity at one tick."""

    tick: int
    subject: int
    type: EventType
    target: int | None = None
    item: int | None = None
    level: int | None = None
    quantity: int | None = None
    gold: int | None = None
    distance: int | None = None
    row: int | None = None
    col: int | None = None
    style: int | None = None
    damage: int | None = None

    def to_line(self) -> str:
        parts = [str(self.tick), self.type.value, str(self.subject)]
        for key in _PAYLOAD_KEYS:
            value = getattr(self, key)
            if value is not None:
                parts.append(f"{key}={value}")
        return " ".join(parts)

    @classmethod
    def from_line(cls, line: str) -> "GameEvent":
        parts = line.split()
        kwargs = {}
        for chunk in parts[3:]:
            key, value = chunk.split("=", 1)
            kwargs[key] = int(value)
        return cls(tick=int(parts[0]), type=EventType(parts[1]),
                   subject=int(parts[2]), **kwargs)


class EventLog:
    """Single-writer append-only log, strictly tick-ordered per subject."""

    def __init__(self):
        self._events: list[GameEvent] = []

    def append(self, event: GameEvent) -> None:
        self._events.append(event)

    def __len__(self) -> int:
        return len(self._events)

    def __iter__(self):
        return iter(self._events)

    def events(self) -> list[GameEvent]:
        return list(self._events)

    def unique_event_types(self) -> int:
        return len({e.type for e in self._events})

    def serialize(self) -> str:
        return "\n".join(e.to_line() for e in self._events)

    @classmethod
    def deserialize(cls, text: str) -> "EventLog":
        log = cls()
        for line in text.splitlines():
            line = line.strip()
            if line:
                log.append(GameEvent.from_line(line))
        return log
