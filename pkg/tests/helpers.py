"""Shared fixtures: small worlds, fake engine state, episode builders."""

from __future__ import annotations

import numpy as np

from gridarena import worldgen
from gridarena.config import new_config
from gridarena.engine import Simulation, _mix_seed
from gridarena.minigames import GameHistory, MinigameKind, setup_episode
from gridarena.worldgen import FogClock


def grass_cfg(size=16, profile="mini", **originals):
    """All-grass map config so movement and spawning are unobstructed."""
    cfg = new_config(profile)
    cfg.set_original("MAP_CENTER", size)
    cfg.set_original("TERRAIN_RESET_TO_GRASS", True)
    cfg.set_original("TERRAIN_SCATTER_EXTRA_RESOURCES", False)
    for key, value in originals.items():
        cfg.set_original(key, value)
    return cfg


def grass_map(size=16, cfg=None, seed=0):
    cfg = cfg or grass_cfg(size)
    return worldgen.generate_map(seed, cfg)


class FakeState:
    """Duck-typed stand-in for engine.Simulation in unit tests."""

    def __init__(self, cfg, tile_map, tick=1, team_game=False):
        self.cfg = cfg
        self.tile_map = tile_map
        self.tick = tick
        self.is_team_game = team_game
        self.entities = {}
        self.drops = {}
        self.events = []
        self.next_npc_id = -1
        self.npcs_dead = 0
        self.fog_clock = FogClock(None, 1.0, 0)
        self.fog_grid = np.zeros((tile_map.side,) * 2)

    def emit(self, event):
        self.events.append(event)

    def add(self, entity):
        self.entities[entity.id] = entity
        self.tile_map.occupants.setdefault(entity.pos, []).append(entity.id)
        self.tile_map.occupants[entity.pos].sort()
        return entity

    def team_of(self, agent_id):
        e = self.entities.get(agent_id)
        return e.team if e else None


def build_sim(kind=MinigameKind.SURVIVAL, profile="mini", seed=0,
              post_overrides=None, shaping=None, **originals):
    cfg = new_config(profile)
    defaults = {"PLAYER_N": 16, "MAP_CENTER": 32, "HORIZON": 64}
    defaults.update(originals)
    for key, value in defaults.items():
        cfg.set_original(key, value)
    rng = np.random.Generator(np.random.PCG64(_mix_seed(seed, 0x5E7)))
    setup = setup_episode(kind, cfg, GameHistory(), rng)
    for key, value in (post_overrides or {}).items():
        cfg.set_for_episode(key, value)
    return Simulation(cfg, setup, seed, shaping)
