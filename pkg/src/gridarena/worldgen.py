"""Procedural terrain, tile materials, resource regeneration, and fog geometry.

Map generation is a pure function of (seed, effective config).  The noise
kernel is multi-octave value noise over a hashed integer lattice; frequencies
are log2-spaced across the configured range and blended with per-octave
interpolation strengths.  All randomness inside the kernel derives from a
splitmix64 hash chain so grids are bit-identical across platforms.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .config import GameConfig
from .defaults import Subsystem
from .errors import TerrainDisabled, ThresholdOrderViolation

MAP_BORDER = 8

# Tile materials.
VOID, WATER, GRASS, FOLIAGE, STONE, TREE, ORE, CRYSTAL, HERB, FISH = range(10)

MATERIAL_NAMES = {
    VOID: "Void",
    WATER: "Water",
    GRASS: "Grass",
    FOLIAGE: "Foliage",
    STONE: "Stone",
    TREE: "Tree",
    ORE: "Ore",
    CRYSTAL: "Crystal",
    HERB: "Herb",
    FISH: "Fish",
}

# Land movement may only enter these.
PASSABLE = frozenset({GRASS, FOLIAGE, TREE, ORE, CRYSTAL, HERB})

# Profession resource tiles and the harvested-item wiring live in economy;
# worldgen only knows capacities/respawn probabilities.
_ASCII = {
    VOID: "#",
    WATER: "~",
    GRASS: ".",
    FOLIAGE: "f",
    STONE: "^",
    TREE: "t",
    ORE: "o",
    CRYSTAL: "c",
    HERB: "h",
    FISH: "F",
}

# Scatter probabilities used during materialization (per eligible tile).
SCATTER_FOOD_PROB = 0.02
SCATTER_WATER_PROB = 0.02
PROFESSION_TILE_PROB = 0.01
FISH_TILE_PROB = 0.05

_M64 = (1 << 64) - 1


def _mix(z: int) -> int:
    """One splitmix64 round over a python int (mod 2^64)."""
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def _mix_u64(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 round over uint64 arrays."""
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _octave_key(seed: int, octave: int, tag: int) -> int:
    h = _mix((seed & _M64) ^ 0xA076_1D64_78BD_642F)
    h = _mix(h ^ (octave & _M64))
    return _mix(h ^ (tag & _M64))


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def noise_octaves(size: int, tiles_per_octave: int) -> int:
    """Octave count scales with how many tiles each octave must cover."""
    return max(1, round(math.log2(max(2.0, size / tiles_per_octave))))


def _octave_params(seed: int, cfg: GameConfig, size: int):
    """Frequencies (cycles/tile) and blend weights for every octave."""
    fmin, fmax = cfg.effective("TERRAIN_FREQUENCY")
    offset = cfg.effective("TERRAIN_FREQUENCY_OFFSET")
    count = noise_octaves(size, cfg.effective("TERRAIN_TILES_PER_OCTAVE"))
    lo = cfg.effective("TERRAIN_LOG_INTERPOLATE_MIN")
    hi = cfg.effective("TERRAIN_LOG_INTERPOLATE_MAX")
    params = []
    for i in range(count):
        frac = i / (count - 1) if count > 1 else 0.0
        exponent = fmin + (fmax - fmin) * frac
        freq = 2.0 ** (exponent + offset) / size
        unit = _octave_key(seed, i, 0x57E16) / 2.0**64
        weight = 2.0 ** (lo + (hi - lo) * unit)
        params.append((freq, weight))
    return params


def generate_noise(seed: int, cfg: GameConfig) -> np.ndarray:
    """Noise grid over the playable area, normalized to [0, 1].

    Deterministic per (seed, effective config); TERRAIN_FLIP_SEED negates the
    seed before hashing, so flip(seed) equals no-flip(-seed) exactly.
    """
    if not cfg.enabled(Subsystem.TERRAIN):
        raise TerrainDisabled("terrain subsystem is disabled")
    if cfg.effective("TERRAIN_FLIP_SEED"):
        seed = -seed
    size = cfg.effective("MAP_CENTER")

    coords = np.arange(size, dtype=np.float64)
    grid = np.zeros((size, size), dtype=np.float64)
    total_weight = 0.0
    for octave, (freq, weight) in enumerate(_octave_params(seed, cfg, size)):
        u = coords * freq
        i0 = np.floor(u).astype(np.int64)
        frac = _fade(u - i0)
        base = np.uint64(_octave_key(seed, octave, 0x1A77))

        def corner(ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
            h = _mix_u64(base ^ ix.astype(np.uint64))
            h = _mix_u64(h ^ iy.astype(np.uint64))
            return h.astype(np.float64) / 2.0**64

        rx = i0[None, :]
        ry = i0[:, None]
        v00 = corner(np.broadcast_to(rx, (size, size)), np.broadcast_to(ry, (size, size)))
        v10 = corner(np.broadcast_to(rx + 1, (size, size)), np.broadcast_to(ry, (size, size)))
        v01 = corner(np.broadcast_to(rx, (size, size)), np.broadcast_to(ry + 1, (size, size)))
        v11 = corner(np.broadcast_to(rx + 1, (size, size)), np.broadcast_to(ry + 1, (size, size)))
        fx = frac[None, :]
        fy = frac[:, None]
        top = v00 + (v10 - v00) * fx
        bottom = v01 + (v11 - v01) * fx
        grid += weight * (top + (bottom - top) * fy)
        total_weight += weight
    grid /= total_weight

    lo, hi = grid.min(), grid.max()
    if hi > lo:
        grid = (grid - lo) / (hi - lo)
    else:
        grid = np.zeros_like(grid)
    return grid


@dataclass
class FogClock:
    """Death fog schedule: onset tick (None = never), speed, safe radius."""

    onset: int | None
    speed: float
    final_size: int

    @classmethod
    def from_config(cls, cfg: GameConfig) -> "FogClock":
        return cls(
            onset=cfg.effective("DEATH_FOG_ONSET"),
            speed=cfg.effective("DEATH_FOG_SPEED"),
            final_size=cfg.effective("DEATH_FOG_FINAL_SIZE"),
        )


class TileMap:
    """Dense square tile grid with a Void border around the playable area.

    Storage is array-of-fields (numpy) rather than objects; ``tile`` builds a
    per-position view for inspection and tests.
    """

    def __init__(self, playable: int, seed: int, materials: np.ndarray,
                 capacity: np.ndarray, respawn: np.ndarray):
        self.playable = playable
        self.border = MAP_BORDER
        self.side = playable + 2 * MAP_BORDER
        self.seed = seed
        self.materials = materials
        self.capacity = capacity
        self.harvests = capacity.copy()
        self.respawn = respawn
        # Entity ids standing on each tile; multiple ids only occur for team
        # spawn stacks or when ALLOW_MOVE_INTO_OCCUPIED_TILE is set.
        self.occupants: dict[tuple[int, int], list[int]] = {}
        b, n = self.border, playable
        rr = np.arange(self.side)[:, None]
        cc = np.arange(self.side)[None, :]
        inside = (rr >= b) & (rr < b + n) & (cc >= b) & (cc < b + n)
        edge_dist = np.minimum(
            np.minimum(rr - b, b + n - 1 - rr), np.minimum(cc - b, b + n - 1 - cc)
        )
        self.dist_edge = np.where(inside, edge_dist, -1).astype(np.int64)
        cr, ccol = self.center
        self.dist_center = np.maximum(np.abs(rr - cr), np.abs(cc - ccol)).astype(np.int64)

    @property
    def center(self) -> tuple[int, int]:
        c = self.border + (self.playable - 1) // 2
        return (c, c)

    def in_playable(self, pos: tuple[int, int]) -> bool:
        return self.dist_edge[pos] >= 0

    def passable(self, pos: tuple[int, int]) -> bool:
        return int(self.materials[pos]) in PASSABLE

    def occupied(self, pos: tuple[int, int]) -> bool:
        return bool(self.occupants.get(pos))

    def tile(self, pos: tuple[int, int]) -> "Tile":
        occ = self.occupants.get(pos)
        return Tile(
            material=int(self.materials[pos]),
            harvests_remaining=int(self.harvests[pos]),
            respawn_probability=float(self.respawn[pos]),
            occupant=occ[0] if occ else None,
        )

    def edge_ring(self) -> list[tuple[int, int]]:
        """Playable-edge ring positions in clockwise order from the corner."""
        b, n = self.border, self.playable
        top = [(b, c) for c in range(b, b + n)]
        right = [(r, b + n - 1) for r in range(b + 1, b + n)]
        bottom = [(b + n - 1, c) for c in range(b + n - 2, b - 1, -1)]
        left = [(r, b) for r in range(b + n - 2, b, -1)]
        return top + right + bottom + left

    def ascii_dump(self) -> str:
        rows = []
        for r in range(self.side):
            rows.append("".join(_ASCII[int(m)] for m in self.materials[r]))
        return "\n".join(rows)


@dataclass
class Tile:
    material: int
    harvests_remaining: int
    respawn_probability: float
    occupant: int | None


def _ensure_center_reachable(mats: np.ndarray) -> None:
    """Keep the center standable and carve a corridor if noise isolated it.

    The center tile is the objective of the center-seizing games and the fog
    safe zone, so every map must offer a land route to it.  Connectivity is
    checked by flood fill from the (always walkable) edge ring; on the rare
    disconnected map a straight east corridor is carved.
    """
    n = mats.shape[0]
    mats[(n - 1) // 2, (n - 1) // 2] = GRASS
    passable = np.isin(mats, tuple(PASSABLE))
    reached = np.zeros_like(passable)
    reached[0, :] = reached[-1, :] = reached[:, 0] = reached[:, -1] = True
    reached &= passable
    while True:
        grown = reached.copy()
        grown[1:, :] |= reached[:-1, :]
        grown[:-1, :] |= reached[1:, :]
        grown[:, 1:] |= reached[:, :-1]
        grown[:, :-1] |= reached[:, 1:]
        grown &= passable
        if (grown == reached).all():
            break
        reached = grown
    center = ((n - 1) // 2, (n - 1) // 2)
    if not reached[center]:
        row = center[0]
        for col in range(center[1] + 1, n):
            if reached[row, col]:
                break
            if not passable[row, col]:
                mats[row, col] = GRASS


def _capacity_for(material: int, cfg: GameConfig) -> tuple[int, float]:
    table = {
        FOLIAGE: ("RESOURCE_FOILAGE_CAPACITY", "RESOURCE_FOILAGE_RESPAWN"),
        TREE: ("PROFESSION_TREE_CAPACITY", "PROFESSION_TREE_RESPAWN"),
        ORE: ("PROFESSION_ORE_CAPACITY", "PROFESSION_ORE_RESPAWN"),
        CRYSTAL: ("PROFESSION_CRYSTAL_CAPACITY", "PROFESSION_CRYSTAL_RESPAWN"),
        HERB: ("PROFESSION_HERB_CAPACITY", "PROFESSION_HERB_RESPAWN"),
        FISH: ("PROFESSION_FISH_CAPACITY", "PROFESSION_FISH_RESPAWN"),
    }
    if material not in table:
        return 0, 0.0
    cap_key, respawn_key = table[material]
    return cfg.effective(cap_key), cfg.effective(respawn_key)


def materialize(noise: np.ndarray, cfg: GameConfig, rng: np.random.Generator,
                seed: int = 0) -> TileMap:
    """Assign materials from threshold bands and wrap with the Void border."""
    t_void = cfg.effective("TERRAIN_VOID")
    t_water = cfg.effective("TERRAIN_WATER")
    t_grass = cfg.effective("TERRAIN_GRASS")
    t_fol = cfg.effective("TERRAIN_FOILAGE")
    if not (t_void < t_water < t_grass < t_fol):
        raise ThresholdOrderViolation(
            f"thresholds must be ordered: {t_void} < {t_water} < {t_grass} < {t_fol}"
        )
    n = noise.shape[0]
    mats = np.full((n, n), STONE, dtype=np.uint8)
    mats[noise < t_fol] = FOLIAGE
    mats[noise < t_grass] = GRASS
    mats[noise < t_water] = WATER
    mats[noise < t_void] = VOID

    if cfg.effective("TERRAIN_DISABLE_STONE"):
        mats[mats == STONE] = GRASS
    if cfg.effective("TERRAIN_RESET_TO_GRASS"):
        mats[:] = GRASS

    # The outermost playable ring is kept walkable so edge spawning always
    # has capacity.
    mats[0, :] = GRASS
    mats[-1, :] = GRASS
    mats[:, 0] = GRASS
    mats[:, -1] = GRASS

    if cfg.effective("TERRAIN_SCATTER_EXTRA_RESOURCES"):
        draw = rng.random((n, n))
        grass = mats == GRASS
        grass[0, :] = grass[-1, :] = grass[:, 0] = grass[:, -1] = False
        mats[grass & (draw < SCATTER_FOOD_PROB)] = FOLIAGE
        mats[grass & (draw >= SCATTER_FOOD_PROB)
             & (draw < SCATTER_FOOD_PROB + SCATTER_WATER_PROB)] = WATER

    if cfg.enabled(Subsystem.PROFESSION):
        draw = rng.random((n, n))
        grass = mats == GRASS
        grass[0, :] = grass[-1, :] = grass[:, 0] = grass[:, -1] = False
        for i, mat in enumerate((TREE, ORE, CRYSTAL, HERB)):
            lo = i * PROFESSION_TILE_PROB
            mats[grass & (draw >= lo) & (draw < lo + PROFESSION_TILE_PROB)] = mat
        water = mats == WATER
        mats[water & (rng.random((n, n)) < FISH_TILE_PROB)] = FISH

    _ensure_center_reachable(mats)

    side = n + 2 * MAP_BORDER
    full = np.full((side, side), VOID, dtype=np.uint8)
    full[MAP_BORDER:MAP_BORDER + n, MAP_BORDER:MAP_BORDER + n] = mats

    capacity = np.zeros((side, side), dtype=np.int32)
    respawn = np.zeros((side, side), dtype=np.float64)
    for mat in (FOLIAGE, TREE, ORE, CRYSTAL, HERB, FISH):
        cap, prob = _capacity_for(mat, cfg)
        mask = full == mat
        capacity[mask] = cap
        respawn[mask] = prob
    return TileMap(n, seed, full, capacity, respawn)


def generate_map(seed: int, cfg: GameConfig) -> TileMap:
    """Noise + materialize under a map-level RNG derived from the seed."""
    noise = generate_noise(seed, cfg)
    rng = np.random.Generator(np.random.PCG64(_mix((seed & _M64) ^ 0x6D41_7053)))
    return materialize(noise, cfg, rng, seed=seed)


class MapPool:
    """Pregenerated-map cache used when MAP_RESET_FROM_FRACTAL is off.

    Maps are keyed by index in [0, MAP_N); each index maps to a fixed seed so
    the pool is reproducible without storing files.
    """

    def __init__(self, cfg: GameConfig):
        self._cfg = cfg
        self._cache: dict[int, TileMap] = {}

    def get(self, index: int) -> TileMap:
        index = index % self._cfg.effective("MAP_N")
        if index not in self._cache:
            self._cache[index] = generate_map(_mix(index ^ 0x9A9A) % (1 << 62), self._cfg)
        cached = self._cache[index]
        # Episodes mutate harvests/occupancy, so hand out a fresh copy.
        fresh = TileMap(cached.playable, cached.seed, cached.materials.copy(),
                        cached.capacity.copy(), cached.respawn.copy())
        return fresh


def tick_regeneration(tile_map: TileMap, rng: np.random.Generator) -> int:
    """Regrow depleted resource tiles; returns how many regenerated.

    Each depleted tile independently returns to full capacity with its
    respawn probability.  Material kind never changes.
    """
    depleted = (tile_map.capacity > 0) & (tile_map.harvests == 0)
    idx = np.flatnonzero(depleted)
    if idx.size == 0:
        return 0
    draws = rng.random(idx.size)
    probs = tile_map.respawn.reshape(-1)[idx]
    hit = idx[draws < probs]
    if hit.size:
        flat = tile_map.harvests.reshape(-1)
        flat[hit] = tile_map.capacity.reshape(-1)[hit]
    return int(hit.size)


def fog_depth(pos: tuple[int, int], tick: int, clock: FogClock, tile_map: TileMap) -> float:
    """Fog depth at one position; 0 before onset and inside the safe radius."""
    if clock.onset is None or tick < clock.onset:
        return 0.0
    if tile_map.dist_center[pos] <= clock.final_size:
        return 0.0
    d = tile_map.dist_edge[pos]
    if d < 0:  # border tiles sit at depth as if on the edge ring
        d = 0
    return max(0.0, (tick - clock.onset) * clock.speed - float(d))


def fog_depth_grid(tick: int, clock: FogClock, tile_map: TileMap) -> np.ndarray:
    """Vectorized fog depth over the whole grid."""
    side = tile_map.side
    if clock.onset is None or tick < clock.onset:
        return np.zeros((side, side), dtype=np.float64)
    d = np.where(tile_map.dist_edge < 0, 0, tile_map.dist_edge)
    depth = np.maximum(0.0, (tick - clock.onset) * clock.speed - d.astype(np.float64))
    depth[tile_map.dist_center <= clock.final_size] = 0.0
    return depth


def center_progress(pos: tuple[int, int], tile_map: TileMap) -> float:
    """0 on the playable-edge ring, 1 at the center, linear in between."""
    d = tile_map.dist_edge[pos]
    if d < 0:
        raise ValueError(f"{pos} outside the playable area")
    max_d = (tile_map.playable - 1) // 2
    return float(d) / max_d if max_d else 1.0


# --- binary map exchange format ------------------------------------------------
#
# magic "GAMAP1" | uint32 LE playable side | int64 LE seed | side^2 material
# bytes (row-major, border included).

_MAP_MAGIC = b"GAMAP1"


def write_map(tile_map: TileMap, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAP_MAGIC)
        fh.write(struct.pack("<Iq", tile_map.playable, tile_map.seed))
        fh.write(tile_map.materials.astype(np.uint8).tobytes())


def read_map(path, cfg: GameConfig) -> TileMap:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAP_MAGIC))
        if magic != _MAP_MAGIC:
            raise ValueError("not a map file")
        playable, seed = struct.unpack("<Iq", fh.read(12))
        side = playable + 2 * MAP_BORDER
        data = np.frombuffer(fh.read(side * side), dtype=np.uint8).reshape(side, side)
    materials = data.copy()
    capacity = np.zeros((side, side), dtype=np.int32)
    respawn = np.zeros((side, side), dtype=np.float64)
    for mat in (FOLIAGE, TREE, ORE, CRYSTAL, HERB, FISH):
        cap, prob = _capacity_for(mat, cfg)
        mask = materials == mat
        capacity[mask] = cap
        respawn[mask] = prob
    return TileMap(playable, seed, materials, capacity, respawn)
