"""Exception types shared across the engine."""


class GridArenaError(Exception):
    """Base class for all engine errors."""


class UnknownAttribute(GridArenaError):
    pass


class TypeMismatch(GridArenaError):
    pass


class ConfigInvalid(GridArenaError):
    pass


class TerrainDisabled(GridArenaError):
    pass


class ThresholdOrderViolation(GridArenaError):
    pass


class InsufficientSpawnCapacity(GridArenaError):
    pass


class InvalidTarget(GridArenaError):
    pass


class EmptySlot(GridArenaError):
    pass


class LevelTooLow(GridArenaError):
    pass


class WrongTile(GridArenaError):
    pass


class InventoryFull(GridArenaError):
    pass


class InsufficientGold(GridArenaError):
    pass


class GiftDisallowed(GridArenaError):
    pass


class ListingExpired(GridArenaError):
    pass


class UnknownAssignee(GridArenaError):
    pass


class MissingCategory(GridArenaError):
    pass


class EmptyPack(GridArenaError):
    pass


class ProfileMismatch(GridArenaError):
    pass


class InvalidKindForProfile(ProfileMismatch):
    pass


class UnknownAgent(GridArenaError):
    pass


class OutOfRangeIndex(GridArenaError):
    pass


class DegenerateRecord(GridArenaError):
    pass


class CorruptReplay(GridArenaError):
    pass


class EpisodeFinished(GridArenaError):
    pass
