"""Thin reset/step/layout adapter so external learners can drive episodes.

The adapter holds no game logic: it samples or forces a minigame at reset,
then marshals batch-major flat buffers (one row per agent, ordered by agent
id) in and out of the engine.  All randomness derives from the last reset
seed, so a seeded episode driven through the binding replays the native
runner exactly.
"""

from __future__ import annotations

import numpy as np

from gridarena import Simulation, new_config, sample_game, setup_episode
from gridarena.arena import _apply_assignments
from gridarena.engine import _mix_seed
from gridarena.errors import EpisodeFinished, InvalidKindForProfile
from gridarena.minigames import (
    GameHistory,
    MinigameKind,
    default_pack,
    parse_game_pack,
    subsystems_for,
)
from gridarena.obs import ObservationLayout, action_dims
from gridarena.replay import build_payload, payload_digest
from gridarena.errors import ProfileMismatch

_SETUP_SALT = 0x5E7


class EnvHandle:
    """One environment instance: a game pack, a config, and its history.

    One live episode at a time; ``reset`` starts the next one.  Many handles
    may run concurrently (one per learner worker), but a handle itself is
    not thread-safe.
    """

    def __init__(self, profile: str = "mini", game_pack: str | None = None,
                 originals: tuple = ()):
        self.cfg = new_config(profile)
        _apply_assignments(self.cfg, originals, original=True)
        pack_text = game_pack or self.cfg.effective("GAME_PACKS")
        self.pack = parse_game_pack(pack_text) if pack_text \
            else default_pack(profile)
        self.history = GameHistory()
        self.sim: Simulation | None = None
        self.kind: MinigameKind | None = None
        self._closed = False

    # -- layout ------------------------------------------------------------

    def layout(self) -> str:
        """The observation layout manifest for this handle's profile."""
        reference = self.sim.layout if self.sim is not None \
            else ObservationLayout(self.cfg)
        return reference.manifest()

    def action_space(self) -> list[tuple[str, int]]:
        return action_dims(self.cfg)

    @property
    def obs_dim(self) -> int:
        reference = self.sim.layout if self.sim is not None \
            else ObservationLayout(self.cfg)
        return reference.total

    @property
    def done(self) -> bool:
        return self.sim is None or self.sim.done

    @property
    def agent_ids(self) -> list[int]:
        return list(self.sim.player_ids) if self.sim is not None else []

    # -- lifecycle -----------------------------------------------------------

    def reset(self, seed: int, game: str | MinigameKind | None = None):
        """Start an episode; returns (obs matrix, info).

        ``game`` forces a minigame; otherwise one is sampled from the pack.
        Adaptive difficulty uses the handle's accumulated history.
        """
        if self._closed:
            raise RuntimeError("handle is closed")
        if self.sim is not None and not self.sim.done:
            self._record_history()
        setup_rng = np.random.Generator(np.random.PCG64(_mix_seed(seed, _SETUP_SALT)))
        if game is None:
            kind = sample_game(self.pack, setup_rng)
        else:
            kind = MinigameKind(game) if isinstance(game, str) else game
        try:
            subsystems_for(kind, self.cfg.profile)
        except ProfileMismatch as exc:
            raise InvalidKindForProfile(str(exc)) from exc
        setup = setup_episode(kind, self.cfg, self.history, setup_rng)
        self.kind = kind
        self.sim = Simulation(self.cfg, setup, seed)
        obs = self._obs_matrix()
        info = {
            "kind": kind.value,
            "agent_ids": self.agent_ids,
            "layout": self.layout(),
            "action_space": self.action_space(),
            "tick": 0,
        }
        return obs, info

    def step(self, actions: np.ndarray):
        """Advance one tick; returns (obs, rewards, dones, info).

        ``actions`` is batch-major int64 of shape (num_agents, action_dims)
        with rows in agent-id order; rows for finished agents are ignored.
        """
        if self.sim is None:
            raise EpisodeFinished("reset the handle before stepping")
        sim = self.sim
        actions = np.asarray(actions, dtype=np.int64)
        expected = (len(sim.player_ids), len(action_dims(self.cfg)))
        if actions.shape != expected:
            raise ValueError(f"actions shape {actions.shape} != {expected}")
        action_map = {agent_id: actions[i]
                      for i, agent_id in enumerate(sim.player_ids)
                      if sim.entities[agent_id].alive}
        reward_map, done_map, step_info = sim.step(action_map)

        obs = self._obs_matrix()
        rewards = np.zeros(len(sim.player_ids), dtype=np.float64)
        dones = np.ones(len(sim.player_ids), dtype=bool)
        for i, agent_id in enumerate(sim.player_ids):
            rewards[i] = reward_map.get(agent_id, 0.0)
            dones[i] = done_map.get(agent_id, True)
        info = dict(step_info)
        if sim.done:
            self._record_history()
            info["task_progress"] = sim.agent_task_progress()
            info["lifespans"] = sim.lifespans()
        return obs, rewards, dones, info

    def close(self) -> None:
        self.sim = None
        self._closed = True

    # -- replay access (marshaling only) ----------------------------------------

    def replay_payload(self) -> dict:
        if self.sim is None:
            raise EpisodeFinished("no episode to export")
        return build_payload(self.sim, policy_of={})

    def replay_digest(self) -> str:
        return payload_digest(self.replay_payload())

    # -- internals -----------------------------------------------------------------

    def _record_history(self) -> None:
        if self.sim is not None and self.sim.done:
            self.history.record(self.sim.winner is not None,
                                self.sim.setup.difficulty)

    def _obs_matrix(self) -> np.ndarray:
        sim = self.sim
        views = sim.observe_batch(want_features=True)
        out = np.zeros((len(sim.player_ids), sim.layout.total), dtype=np.float32)
        for i, agent_id in enumerate(sim.player_ids):
            out[i] = views[agent_id][0]
        return out


def make_env(profile: str = "mini", game_pack: str | None = None,
             originals: tuple = ()) -> EnvHandle:
    return EnvHandle(profile=profile, game_pack=game_pack, originals=originals)


class VectorEnv:
    """Convenience wrapper over several independent handles."""

    def __init__(self, count: int, profile: str = "mini",
                 game_pack: str | None = None, originals: tuple = ()):
        self.handles = [make_env(profile, game_pack, originals)
                        for _ in range(count)]

    def reset(self, seeds, game=None):
        results = [h.reset(seed, game) for h, seed in zip(self.handles, seeds)]
        return [r[0] for r in results], [r[1] for r in results]

    def step(self, action_batches):
        obs, rewards, dones, infos = [], [], [], []
        for handle, actions in zip(self.handles, action_batches):
            o, r, d, i = handle.step(actions)
            obs.append(o)
            rewards.append(r)
            dones.append(d)
            infos.append(i)
        return obs, rewards, dones, infos

    def close(self) -> None:
        for handle in self.handles:
            handle.close()
