"""Layered configuration registry.

A GameConfig holds the immutable original attribute values plus a layer of
per-episode overrides.  Reads go through ``effective``; ``reset_overrides``
restores the original view.  Subsystems can likewise be toggled per episode,
which is how minigames reshape the engine during reset.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .defaults import (
    FULL_SUBSYSTEMS,
    MINI_SUBSYSTEMS,
    PROBABILITY_KEYS,
    SCHEMA,
    SUBSYSTEM_REQUIRES,
    Subsystem,
)
from .errors import ConfigInvalid, TypeMismatch, UnknownAttribute

PROFILES = ("mini", "full")


@dataclass(frozen=True)
class DependencyViolation:
    subsystem: Subsystem
    requires: Subsystem

    def __str__(self) -> str:
        return f"{self.subsystem.value} requires {self.requires.value}"


@dataclass(frozen=True)
class RangeViolation:
    key: str
    value: object
    lo: object
    hi: object

    def __str__(self) -> str:
        return f"{self.key}={self.value!r} outside [{self.lo}, {self.hi}]"


def team_assignments(num_agents: int, num_agents_per_team: int) -> dict[int, list[int]]:
    """Partition agent ids 1..num_agents into consecutive fixed-size teams.

    The trailing team keeps any remainder so every agent has a team.
    """
    if num_agents_per_team < 1:
        raise ValueError("num_agents_per_team must be >= 1")
    teams: dict[int, list[int]] = {}
    team_id = 0
    for start in range(1, num_agents + 1, num_agents_per_team):
        members = list(range(start, min(start + num_agents_per_team, num_agents + 1)))
        if teams and len(members) < num_agents_per_team:
            teams[team_id - 1].extend(members)
        else:
            teams[team_id] = members
            team_id += 1
    return teams


def _typecheck(key: str, value):
    """Validate and normalize one value against the schema; returns it."""
    spec = SCHEMA[key]
    kind = spec.kind
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeMismatch(f"{key} expects int, got {value!r}")
    elif kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeMismatch(f"{key} expects real, got {value!r}")
        value = float(value)
    elif kind == "bool":
        if not isinstance(value, bool):
            raise TypeMismatch(f"{key} expects bool, got {value!r}")
    elif kind == "opt_int":
        if value is not None and (isinstance(value, bool) or not isinstance(value, int)):
            raise TypeMismatch(f"{key} expects int or None, got {value!r}")
    elif kind == "pair":
        if not (isinstance(value, tuple) and len(value) == 2):
            raise TypeMismatch(f"{key} expects a 2-tuple, got {value!r}")
        value = (float(value[0]), float(value[1]))
    elif kind == "int_tuple":
        if not isinstance(value, tuple) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise TypeMismatch(f"{key} expects a tuple of ints, got {value!r}")
    elif kind == "str":
        if not isinstance(value, str):
            raise TypeMismatch(f"{key} expects str, got {value!r}")
    elif kind == "teams":
        if isinstance(value, bool):
            raise TypeMismatch(f"{key} expects int or mapping, got {value!r}")
        if isinstance(value, int):
            if value < 1:
                raise TypeMismatch(f"{key} team size must be >= 1")
        elif isinstance(value, dict):
            for tid, members in value.items():
                if not isinstance(tid, int) or not isinstance(members, list):
                    raise TypeMismatch(f"{key} expects team-id -> [agent ids]")
        else:
            raise TypeMismatch(f"{key} expects int or mapping, got {value!r}")
    else:  # pragma: no cover - schema authoring error
        raise AssertionError(f"unknown schema kind {kind}")
    return value


class GameConfig:
    """Original attribute values plus per-episode overrides.

    Mutation (``set_for_episode``, subsystem toggles) is intended to happen
    single-threaded during episode reset; afterwards the object is treated as
    read-only and may be shared across episode workers.
    """

    def __init__(self, profile: str = "mini"):
        if profile not in PROFILES:
            raise ConfigInvalid(f"unknown profile {profile!r}")
        self.profile = profile
        base = MINI_SUBSYSTEMS if profile == "mini" else FULL_SUBSYSTEMS
        self._original_subsystems = frozenset(base)
        self._episode_subsystems: frozenset[Subsystem] | None = None
        self._attributes = {k: s.default for k, s in SCHEMA.items()}
        self._overrides: dict[str, object] = {}
        self._effective_cache: dict[str, object] | None = None

    # -- reads ------------------------------------------------------------

    def original(self, key: str):
        if key not in SCHEMA:
            raise UnknownAttribute(key)
        return self._attributes[key]

    def effective(self, key: str):
        cache = self._effective_cache
        if cache is None:
            cache = self._effective_cache = {**self._attributes, **self._overrides}
        try:
            return cache[key]
        except KeyError:
            raise UnknownAttribute(key) from None

    def __getattr__(self, key: str):
        # Convenience: cfg.HORIZON reads the effective value.
        if key.isupper() and key in SCHEMA:
            return self.effective(key)
        raise AttributeError(key)

    @property
    def enabled_subsystems(self) -> frozenset[Subsystem]:
        if self._episode_subsystems is not None:
            return self._episode_subsystems
        return self._original_subsystems

    def enabled(self, subsystem: Subsystem) -> bool:
        return subsystem in self.enabled_subsystems

    def teams(self) -> dict[int, list[int]]:
        """Effective team map; an int TEAMS value expands against PLAYER_N."""
        value = self.effective("TEAMS")
        if isinstance(value, int):
            return team_assignments(self.effective("PLAYER_N"), value)
        return {tid: list(members) for tid, members in value.items()}

    # -- episode-scoped mutation -------------------------------------------

    def set_original(self, key: str, value) -> "GameConfig":
        """Permanently change an original value (setup time, not episodes)."""
        if key not in SCHEMA:
            raise UnknownAttribute(key)
        self._attributes[key] = _typecheck(key, value)
        self._effective_cache = None
        return self

    def set_for_episode(self, key: str, value) -> "GameConfig":
        if key not in SCHEMA:
            raise UnknownAttribute(key)
        self._overrides[key] = _typecheck(key, value)
        self._effective_cache = None
        return self

    def enable_for_episode(self, subsystem: Subsystem) -> "GameConfig":
        current = set(self.enabled_subsystems)
        current.add(subsystem)
        self._episode_subsystems = frozenset(current)
        return self

    def disable_for_episode(self, subsystem: Subsystem) -> "GameConfig":
        current = set(self.enabled_subsystems)
        current.discard(subsystem)
        self._episode_subsystems = frozenset(current)
        return self

    def set_subsystems_for_episode(self, subsystems) -> "GameConfig":
        self._episode_subsystems = frozenset(subsystems)
        return self

    def reset_overrides(self) -> "GameConfig":
        self._overrides.clear()
        self._episode_subsystems = None
        self._effective_cache = None
        return self

    # -- validation ---------------------------------------------------------

    def validate(self) -> list:
        """Dependency and range violations for the effective view.

        Pure: never mutates the config; violations come back as data.
        """
        violations: list = []
        enabled = self.enabled_subsystems
        for sub, deps in SUBSYSTEM_REQUIRES.items():
            if sub in enabled:
                for dep in deps:
                    if dep not in enabled:
                        violations.append(DependencyViolation(sub, dep))
        for key, spec in SCHEMA.items():
            value = self.effective(key)
            if value is None or spec.bounds is None:
                continue
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                continue
            lo, hi = spec.bounds
            if (lo is not None and value < lo) or (hi is not None and value > hi):
                violations.append(RangeViolation(key, value, lo, hi))
        return violations

    # -- persistence ----------------------------------------------------------

    def save(self, path) -> None:
        Path(path).write_text(dumps(self))

    # -- misc -------------------------------------------------------------------

    def snapshot(self) -> dict[str, object]:
        """Effective view of all attributes (for digests and replays)."""
        out = {k: self.effective(k) for k in sorted(SCHEMA)}
        out["__profile__"] = self.profile
        out["__subsystems__"] = sorted(s.value for s in self.enabled_subsystems)
        return out


def new_config(profile: str = "mini") -> GameConfig:
    """Fresh config for a profile, with shipped defaults."""
    return GameConfig(profile)


# --- config file format -------------------------------------------------------
#
# One `KEY = VALUE` per line; '#' starts a comment.  `profile = mini|full`
# selects the subsystem set.  Value syntax: none | true | false | integers |
# reals | (a, b) tuples | bare strings.  TEAMS accepts an integer team size.


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return "(" + ", ".join(_format_value(v) for v in value) + ")"
    if isinstance(value, dict):  # explicit TEAMS mapping
        return ";".join(f"{tid}:{','.join(map(str, m))}" for tid, m in value.items())
    return repr(value) if isinstance(value, float) else str(value)


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("none", "null"):
        return None
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("(") and text.endswith(")"):
        parts = [p.strip() for p in text[1:-1].split(",") if p.strip()]
        return tuple(_parse_scalar(p) for p in parts)
    if ":" in text and ";" in text or (":" in text and "," in text.split(":", 1)[1]):
        teams: dict[int, list[int]] = {}
        for chunk in text.split(";"):
            tid, members = chunk.split(":")
            teams[int(tid)] = [int(m) for m in members.split(",") if m]
        return teams
    return _parse_scalar(text)


def dumps(cfg: GameConfig) -> str:
    lines = [f"profile = {cfg.profile}"]
    for key in sorted(SCHEMA):
        lines.append(f"{key} = {_format_value(cfg.original(key))}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> GameConfig:
    profile = "mini"
    pairs: list[tuple[str, object]] = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"bad config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "profile":
            profile = value
        else:
            pairs.append((key, _parse_value(value)))
    cfg = GameConfig(profile)
    for key, value in pairs:
        cfg.set_original(key, value)
    return cfg


def load(path) -> GameConfig:
    return loads(Path(path).read_text())


def apply_overrides(cfg: GameConfig, assignments) -> GameConfig:
    """Apply CLI-style `KEY=VALUE` strings as episode overrides."""
    for text in assignments:
        if "=" not in text:
            raise ConfigInvalid(f"--set expects KEY=VALUE, got {text!r}")
        key, value = text.split("=", 1)
        cfg.set_for_episode(key.strip(), _parse_value(value))
    return cfg
