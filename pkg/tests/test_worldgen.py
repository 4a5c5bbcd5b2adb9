import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridarena import worldgen as w
from gridarena.config import new_config
from gridarena.defaults import Subsystem
from gridarena.errors import TerrainDisabled, ThresholdOrderViolation

from .oracles import band_histogram, reference_noise

# Frozen from tests/oracles.py reference_noise(0, 128) before the production
# kernel was vectorized.
NOISE_MEAN_SEED0_128 = 0.40472376887857897
BAND_COUNTS_SEED0_128 = {"void": 0, "water": 2885, "grass": 10597, "foliage": 1910, "stone": 992}


def small_cfg(size=32, profile="mini"):
    cfg = new_config(profile)
    cfg.set_for_episode("MAP_CENTER", size)
    return cfg


def test_noise_deterministic():
    cfg = small_cfg()
    a = w.generate_noise(7, cfg)
    b = w.generate_noise(7, cfg)
    assert np.array_equal(a, b)


def test_noise_flip_seed_equals_negated_seed():
    cfg = small_cfg()
    flipped = small_cfg()
    flipped.set_for_episode("TERRAIN_FLIP_SEED", True)
    assert np.array_equal(w.generate_noise(5, flipped), w.generate_noise(-5, cfg))


def test_noise_matches_reference_oracle_small():
    cfg = small_cfg(32)
    prod = w.generate_noise(3, cfg)
    ref = np.array(reference_noise(3, 32))
    assert np.abs(prod - ref).max() == 0.0


def test_noise_mean_matches_frozen_oracle_value():
    grid = w.generate_noise(0, new_config("mini"))
    assert grid.shape == (128, 128)
    assert grid.mean() == pytest.approx(NOISE_MEAN_SEED0_128, abs=1e-12)
    assert grid.min() >= 0.0 and grid.max() <= 1.0


def test_noise_requires_terrain():
    cfg = small_cfg()
    cfg.disable_for_episode(Subsystem.TERRAIN)
    with pytest.raises(TerrainDisabled):
        w.generate_noise(0, cfg)


def test_band_histogram_matches_oracle():
    cfg = new_config("mini")
    cfg.set_for_episode("TERRAIN_SCATTER_EXTRA_RESOURCES", False)
    noise = w.generate_noise(0, cfg)
    rng = np.random.default_rng(0)
    tile_map = w.materialize(noise, cfg, rng)
    interior = tile_map.materials[
        tile_map.border + 1:-tile_map.border - 1, tile_map.border + 1:-tile_map.border - 1
    ]
    counts = {
        "water": int((interior == w.WATER).sum()),
        "grass": int((interior == w.GRASS).sum()),
        "foliage": int((interior == w.FOLIAGE).sum()),
        "stone": int((interior == w.STONE).sum()),
    }
    # The forced-grass spawn ring is excluded on both sides of the check; the
    # forced-grass center tile moves one count out of its oracle band.
    ref_grid = reference_noise(0, 128)
    ref = band_histogram([row[1:-1] for row in ref_grid[1:-1]],
                         0.0, 0.25, 0.55, 0.65)
    center_value = ref_grid[63][63]
    for band, hi in (("water", 0.25), ("grass", 0.55), ("foliage", 0.65)):
        if center_value < hi:
            center_band = band
            break
    else:
        center_band = "stone"
    if center_band != "grass":
        ref[center_band] -= 1
        ref["grass"] += 1
    for key, value in counts.items():
        assert value == ref[key], key


def test_threshold_bands_partition():
    cfg = small_cfg()
    noise = w.generate_noise(2, cfg)
    tile_map = w.materialize(noise, cfg, np.random.default_rng(0))
    b = tile_map.border
    assert tile_map.materials[:b, :].max() == w.VOID
    interior = tile_map.materials[b:-b, b:-b]
    assert set(np.unique(interior)) <= {w.WATER, w.GRASS, w.FOLIAGE, w.STONE}


def test_threshold_order_enforced():
    cfg = small_cfg()
    cfg.set_for_episode("TERRAIN_WATER", 0.9)
    noise = w.generate_noise(0, cfg)
    with pytest.raises(ThresholdOrderViolation):
        w.materialize(noise, cfg, np.random.default_rng(0))


def test_reset_to_grass():
    cfg = small_cfg()
    cfg.set_for_episode("TERRAIN_RESET_TO_GRASS", True)
    cfg.set_for_episode("TERRAIN_SCATTER_EXTRA_RESOURCES", False)
    tile_map = w.generate_map(0, cfg)
    b = tile_map.border
    assert (tile_map.materials[b:-b, b:-b] == w.GRASS).all()


def test_reset_to_grass_with_scatter_only_adds_resources():
    cfg = small_cfg(64)
    cfg.set_for_episode("TERRAIN_RESET_TO_GRASS", True)
    tile_map = w.generate_map(0, cfg)
    b = tile_map.border
    interior = tile_map.materials[b:-b, b:-b]
    assert set(np.unique(interior)) <= {w.GRASS, w.FOLIAGE, w.WATER}


def test_disable_stone():
    cfg = small_cfg()
    cfg.set_for_episode("TERRAIN_DISABLE_STONE", True)
    tile_map = w.generate_map(1, cfg)
    assert (tile_map.materials != w.STONE).all()


def test_full_profile_places_profession_tiles():
    cfg = new_config("full")
    cfg.set_for_episode("MAP_CENTER", 96)
    tile_map = w.generate_map(0, cfg)
    mats = set(np.unique(tile_map.materials))
    assert {w.TREE, w.ORE, w.CRYSTAL, w.HERB} <= mats


def test_map_generation_pure():
    cfg = small_cfg()
    a = w.generate_map(11, cfg)
    b = w.generate_map(11, cfg)
    assert np.array_equal(a.materials, b.materials)
    assert np.array_equal(a.harvests, b.harvests)


def test_edge_ring_is_walkable_and_distinct():
    tile_map = w.generate_map(0, small_cfg(32))
    ring = tile_map.edge_ring()
    assert len(ring) == len(set(ring)) == 4 * (32 - 1)
    assert all(tile_map.passable(p) for p in ring)


# --- regeneration -------------------------------------------------------------


def make_single_tile_map(prob, cfg=None):
    cfg = cfg or small_cfg(8)
    cfg.set_for_episode("TERRAIN_RESET_TO_GRASS", True)
    cfg.set_for_episode("TERRAIN_SCATTER_EXTRA_RESOURCES", False)
    tile_map = w.generate_map(0, cfg)
    pos = tile_map.center
    tile_map.materials[pos] = w.FOLIAGE
    tile_map.capacity[pos] = 1
    tile_map.harvests[pos] = 0
    tile_map.respawn[pos] = prob
    return tile_map, pos


def test_regeneration_zero_probability_never_fires():
    tile_map, pos = make_single_tile_map(0.0)
    rng = np.random.default_rng(0)
    for _ in range(10_000):
        w.tick_regeneration(tile_map, rng)
    assert tile_map.harvests[pos] == 0


def test_regeneration_certainty_fires_next_tick():
    tile_map, pos = make_single_tile_map(1.0)
    w.tick_regeneration(tile_map, np.random.default_rng(0))
    assert tile_map.harvests[pos] == 1


def test_regeneration_rate_within_binomial_bound():
    # p = 0.1 over 10^5 tile-ticks: empirical rate within 3 sigma.
    tile_map, pos = make_single_tile_map(0.1)
    rng = np.random.default_rng(42)
    n, hits = 100_000, 0
    for _ in range(n):
        tile_map.harvests[pos] = 0
        hits += w.tick_regeneration(tile_map, rng)
    p = 0.1
    sigma = (p * (1 - p) / n) ** 0.5
    assert abs(hits / n - p) < 3 * sigma


def test_regeneration_preserves_material():
    tile_map, pos = make_single_tile_map(1.0)
    w.tick_regeneration(tile_map, np.random.default_rng(0))
    assert tile_map.materials[pos] == w.FOLIAGE


# --- fog ---------------------------------------------------------------------


def fog_map(size=32):
    return w.generate_map(0, small_cfg(size))


def test_fog_zero_before_onset():
    tile_map = fog_map()
    clock = w.FogClock(onset=50, speed=1.0, final_size=4)
    for tick in (0, 25, 49):
        assert w.fog_depth_grid(tick, clock, tile_map).max() == 0.0


def test_fog_center_safe_forever():
    tile_map = fog_map()
    clock = w.FogClock(onset=1, speed=2.0, final_size=1)
    for tick in (10, 100, 100_000):
        assert w.fog_depth(tile_map.center, tick, clock, tile_map) == 0.0


def test_fog_edge_depth_closed_form():
    # edge tile, tick = onset + 14, speed 1/7 -> depth 2
    tile_map = fog_map()
    clock = w.FogClock(onset=32, speed=1 / 7, final_size=2)
    edge = tile_map.edge_ring()[0]
    assert w.fog_depth(edge, 32 + 14, clock, tile_map) == pytest.approx(2.0)


@settings(max_examples=50, deadline=None)
@given(tick=st.integers(0, 500), r=st.integers(0, 31), c=st.integers(0, 31))
def test_fog_monotone_in_tick(tick, r, c):
    tile_map = fog_map()
    clock = w.FogClock(onset=32, speed=0.3, final_size=3)
    pos = (tile_map.border + r, tile_map.border + c)
    assert w.fog_depth(pos, tick + 1, clock, tile_map) >= w.fog_depth(pos, tick, clock, tile_map)


def test_fog_grid_matches_scalar():
    tile_map = fog_map()
    clock = w.FogClock(onset=10, speed=0.5, final_size=3)
    grid = w.fog_depth_grid(40, clock, tile_map)
    for pos in [(8, 8), (16, 20), tile_map.center, (8 + 31, 8 + 31)]:
        assert grid[pos] == pytest.approx(w.fog_depth(pos, 40, clock, tile_map))


# --- center progress ------------------------------------------------------------


def test_center_progress_extremes():
    tile_map = fog_map(41)  # odd side: single innermost tile
    assert w.center_progress(tile_map.center, tile_map) == 1.0
    assert w.center_progress(tile_map.edge_ring()[0], tile_map) == 0.0


def test_center_progress_halfway():
    tile_map = fog_map(41)
    b = tile_map.border
    pos = (b + 10, b + 20)  # Chebyshev edge distance 10 of max 20
    assert w.center_progress(pos, tile_map) == pytest.approx(0.5)


def test_center_progress_even_side_center_tile():
    tile_map = fog_map(32)
    assert w.center_progress(tile_map.center, tile_map) == 1.0


# --- binary exchange format ------------------------------------------------------


def test_map_round_trip(tmp_path):
    cfg = small_cfg()
    tile_map = w.generate_map(9, cfg)
    path = tmp_path / "map.bin"
    w.write_map(tile_map, path)
    loaded = w.read_map(path, cfg)
    assert loaded.playable == tile_map.playable
    assert loaded.seed == tile_map.seed
    assert np.array_equal(loaded.materials, tile_map.materials)
    assert np.array_equal(loaded.capacity, tile_map.capacity)


def test_map_pool_reuses_by_index():
    cfg = small_cfg()
    cfg.set_for_episode("MAP_N", 4)
    pool = w.MapPool(cfg)
    a = pool.get(1)
    b = pool.get(5)  # 5 % 4 == 1
    assert np.array_equal(a.materials, b.materials)
    a.harvests[:] = 0  # mutating one copy must not leak into the pool
    c = pool.get(1)
    assert (c.harvests == c.capacity).all()


def test_ascii_dump_shape():
    tile_map = fog_map(16)
    dump = tile_map.ascii_dump().splitlines()
    assert len(dump) == tile_map.side
    assert all(len(row) == tile_map.side for row in dump)
