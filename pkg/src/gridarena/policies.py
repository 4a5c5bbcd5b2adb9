"""Scripted baseline policies.

Policies consume only the flat observation and its masks (never engine
internals) and are deterministic given the episode seed.  ``random_valid``
needs just the masks, which lets the runner skip feature assembly for it.
"""

from __future__ import annotations

import hashlib
from collections import deque

import numpy as np

from . import worldgen
from .config import GameConfig
from .obs import (
    EF_MAGE_LVL,
    EF_MELEE_LVL,
    EF_RANGE_LVL,
    EF_ROW,
    EF_COL,
    EF_SAME_TEAM,
    EF_SELF,
    EF_KIND,
    TF_HARVESTABLE,
    TF_MATERIAL,
    ObsContext,
    action_dims,
    noop_action,
)

_DIR_TO_INDEX = {(-1, 0): 0, (1, 0): 1, (0, 1): 2, (0, -1): 3}


def _policy_seed(episode_seed: int, identity: str) -> int:
    digest = hashlib.sha256(f"{episode_seed}:{identity}".encode()).digest()
    return int.from_bytes(digest[:8], "little") % (1 << 63)


class Policy:
    """Maps (flat observation, masks) to a flat action, one agent at a time."""

    identity = "policy"
    needs_obs = True

    def reset(self, layout, cfg: GameConfig, episode_seed: int) -> None:
        self.layout = layout
        self.cfg = cfg
        self.dims = action_dims(cfg)
        self._noop_template = noop_action(cfg)
        self.rng = np.random.Generator(
            np.random.PCG64(_policy_seed(episode_seed, self.identity)))

    def act(self, agent_id: int, obs, ctx: ObsContext) -> np.ndarray:
        raise NotImplementedError

    # -- shared helpers ------------------------------------------------------

    def _noop(self) -> np.ndarray:
        return self._noop_template.copy()

    def _move_toward(self, action: np.ndarray, dr: int, dc: int,
                     move_mask: np.ndarray, detour: bool = False) -> None:
        """Pick a legal step that reduces the larger axis delta first.

        With ``detour`` the perpendicular directions are tried when both
        approach moves are blocked, so walls get rounded instead of hugged.
        """
        prefs = []
        if abs(dr) >= abs(dc):
            if dr:
                prefs.append((int(np.sign(dr)), 0))
            if dc:
                prefs.append((0, int(np.sign(dc))))
        else:
            if dc:
                prefs.append((0, int(np.sign(dc))))
            if dr:
                prefs.append((int(np.sign(dr)), 0))
        if detour:
            remaining = [d for d in ((-1, 0), (1, 0), (0, 1), (0, -1))
                         if d not in prefs]
            if self.rng.random() < 0.5:
                remaining.reverse()
            prefs.extend(remaining)
        for delta in prefs:
            idx = _DIR_TO_INDEX[delta]
            if move_mask[idx]:
                action[0] = idx
                return

    def _self_row(self, entity_rows: np.ndarray) -> int:
        hits = np.flatnonzero(entity_rows[:, EF_SELF] > 0.5)
        return int(hits[0]) if len(hits) else 0

    def _forage_step(self, action, tiles, center, me, move_mask) -> bool:
        """Shared hungry-behavior: head for food or water; True if handled."""
        food_frac, water_frac = float(me[10]), float(me[11])
        materials = np.rint(tiles[:, :, TF_MATERIAL] * 10).astype(np.int64)
        if food_frac <= 0.5:
            food = (materials == worldgen.FOLIAGE) \
                & (tiles[:, :, TF_HARVESTABLE] > 0.5)
            rs, cs = np.nonzero(food)
            if len(rs):
                d = np.maximum(np.abs(rs - center), np.abs(cs - center))
                best = int(np.lexsort((cs, rs, d))[0])
                delta = (int(rs[best] - center), int(cs[best] - center))
                if delta != (0, 0):
                    self._move_toward(action, *delta, move_mask, detour=True)
                return True
        if water_frac <= 0.5:
            water = (materials == worldgen.WATER) | (materials == worldgen.FISH)
            rs, cs = np.nonzero(water)
            if len(rs):
                d = np.maximum(np.abs(rs - center), np.abs(cs - center))
                best = int(np.lexsort((cs, rs, d))[0])
                delta = (int(rs[best] - center), int(cs[best] - center))
                if max(abs(delta[0]), abs(delta[1])) > 1:
                    self._move_toward(action, *delta, move_mask, detour=True)
                return True
        return False


class RandomValidPolicy(Policy):
    """Uniform over unmasked choices in every action dimension."""

    identity = "random_valid"
    needs_obs = False

    def act(self, agent_id: int, obs, ctx: ObsContext) -> np.ndarray:
        action = self._noop()
        for i, (name, _n) in enumerate(self.dims):
            mask = ctx.masks[name]
            legal = np.flatnonzero(mask)
            if len(legal):
                action[i] = int(legal[self.rng.integers(len(legal))])
        return action


class ForagerPolicy(Policy):
    """Camp beside water and make food runs only when genuinely hungry.

    Eating restores half the gauge, so trips to foliage start at half-full;
    anything earlier wastes a finite harvest.
    """

    identity = "forager"

    def _nearest(self, targets, center):
        rs, cs = np.nonzero(targets)
        if len(rs) == 0:
            return None
        d = np.maximum(np.abs(rs - center), np.abs(cs - center))
        best = int(np.lexsort((cs, rs, d))[0])
        return int(rs[best] - center), int(cs[best] - center)

    def act(self, agent_id: int, obs, ctx: ObsContext) -> np.ndarray:
        action = self._noop()
        layout = self.layout
        window = layout.window
        tiles = layout.slice(obs, "tile").reshape(window, window, -1)
        center = window // 2
        materials = np.rint(tiles[:, :, TF_MATERIAL] * 10).astype(np.int64)
        food = (materials == worldgen.FOLIAGE) & (tiles[:, :, TF_HARVESTABLE] > 0.5)
        water = (materials == worldgen.WATER) | (materials == worldgen.FISH)

        entity_rows = layout.slice(obs, "entity")
        me = entity_rows[self._self_row(entity_rows)]
        food_frac, water_frac = float(me[10]), float(me[11])

        if food_frac <= 0.5:
            delta = self._nearest(food, center)
            if delta is not None:
                if delta != (0, 0):
                    self._move_toward(action, *delta, ctx.masks["move"])
                return action
        delta = self._nearest(water, center)
        if delta is not None:
            if max(abs(delta[0]), abs(delta[1])) <= 1:
                if water_frac > 0.9 and food_frac <= 0.8:
                    # topped up: pre-position toward the next meal
                    food_delta = self._nearest(food, center)
                    if food_delta is not None and \
                            max(abs(food_delta[0]), abs(food_delta[1])) > 2:
                        self._move_toward(action, *food_delta, ctx.masks["move"])
                return action  # camp adjacent and drink
            self._move_toward(action, *delta, ctx.masks["move"])
            return action
        if food_frac <= 0.9:
            delta = self._nearest(food, center)
            if delta is not None:
                if delta != (0, 0):
                    self._move_toward(action, *delta, ctx.masks["move"])
                return action
        # Nothing useful visible: wander.
        legal = np.flatnonzero(ctx.masks["move"])
        action[0] = int(legal[self.rng.integers(len(legal))])
        return action


class BrawlerPolicy(Policy):
    """Attack the nearest unmasked foe with the best style, else close in.

    Falls back to foraging when gauges run low: a dead brawler wins nothing.
    """

    identity = "brawler"

    def act(self, agent_id: int, obs, ctx: ObsContext) -> np.ndarray:
        action = self._noop()
        layout = self.layout
        entity_rows = layout.slice(obs, "entity")
        me = entity_rows[self._self_row(entity_rows)]

        style_mask = ctx.masks["attack_style"]
        levels = (me[EF_MELEE_LVL], me[EF_RANGE_LVL], me[EF_MAGE_LVL])
        style = max(range(3), key=lambda s: (style_mask[s], levels[s], -s))

        target_mask = ctx.masks["attack_target"]
        attackable = np.flatnonzero(target_mask[:-1])
        if len(attackable) and style_mask.any():
            action[1] = style
            action[2] = int(attackable[0])  # rows are distance-sorted

        window = layout.window
        tiles = layout.slice(obs, "tile").reshape(window, window, -1)
        if self._forage_step(action, tiles, window // 2, me, ctx.masks["move"]):
            return action
        if len(attackable):
            return action

        # Walk toward the nearest visible foe.
        my_r, my_c = me[EF_ROW], me[EF_COL]
        for i in range(entity_rows.shape[0]):
            row = entity_rows[i]
            if row[EF_KIND] == 0 or row[EF_SELF] > 0.5 or row[EF_SAME_TEAM] > 0.5:
                continue
            if abs(row[EF_KIND] - 0.25) > 1e-6:
                continue  # only chase players
            dr = round((row[EF_ROW] - my_r) * self._side())
            dc = round((row[EF_COL] - my_c) * self._side())
            self._move_toward(action, dr, dc, ctx.masks["move"], detour=True)
            return action
        legal = np.flatnonzero(ctx.masks["move"])
        action[0] = int(legal[self.rng.integers(len(legal))])
        return action

    def _side(self) -> int:
        return self.cfg.effective("MAP_CENTER") + 2 * worldgen.MAP_BORDER


# Indices N=0, S=1, E=2, W=3: clockwise turns and reversals for the
# wall-following fallback.
_CLOCKWISE = {0: 2, 2: 1, 1: 3, 3: 0}
_COUNTERCW = {v: k for k, v in _CLOCKWISE.items()}
_REVERSE = {0: 1, 1: 0, 2: 3, 3: 2}


class RacerPolicy(Policy):
    """Plan toward the map center with BFS over the visible tile window.

    Each tick the racer searches its vision window for the reachable tile
    closest to the center and takes the first step of that path.  When no
    in-window tile improves on the current position (a bay wider than the
    window), it wall-follows with a per-agent fixed hand until the planner
    finds an improving route again.
    """

    identity = "racer"

    def reset(self, layout, cfg: GameConfig, episode_seed: int) -> None:
        super().reset(layout, cfg, episode_seed)
        self._nav: dict[int, dict] = {}   # wall-follow scratch per agent
        self._hand: dict[int, int] = {}   # wall side, fixed per agent
        self._blocked: dict[int, int] = {}
        self._visits: dict[int, dict] = {}  # agent -> {(row, col): count}

    def _window_step(self, tiles, dr: int, dc: int, my_r: int, my_c: int,
                     visits: dict) -> int | None:
        """First move of the best in-window path; None if nothing improves.

        Cells already visited carry a penalty, so dead-end pockets stop
        looking attractive after a few bounces; the target is tie-broken by
        absolute coordinates so it stays fixed while the racer walks.
        """
        window = tiles.shape[0]
        mid = window // 2
        materials = np.rint(tiles[:, :, TF_MATERIAL] * 10).astype(np.int64)
        passable = np.isin(materials, tuple(worldgen.PASSABLE))
        # Chebyshev distance from each window cell to the (global) center.
        rows = np.arange(window)[:, None] - mid
        cols = np.arange(window)[None, :] - mid
        cell_dist = np.maximum(np.abs(rows - dr), np.abs(cols - dc))

        start = (mid, mid)
        parent = {start: None}
        depth = {start: 0}
        queue = deque([start])
        best = None
        start_score = int(cell_dist[start]) + visits.get((my_r, my_c), 0)
        best_key = (start_score, 0, my_r, my_c)
        while queue:
            cell = queue.popleft()
            gr = my_r + cell[0] - mid
            gc = my_c + cell[1] - mid
            key = (int(cell_dist[cell]) + visits.get((gr, gc), 0),
                   depth[cell], gr, gc)
            if cell != start and key < best_key:
                best, best_key = cell, key
            for d_r, d_c in ((-1, 0), (1, 0), (0, 1), (0, -1)):
                nxt = (cell[0] + d_r, cell[1] + d_c)
                if 0 <= nxt[0] < window and 0 <= nxt[1] < window \
                        and nxt not in parent and passable[nxt]:
                    parent[nxt] = cell
                    depth[nxt] = depth[cell] + 1
                    queue.append(nxt)
        if best is None:
            return None
        step = best
        while parent[step] != start:
            step = parent[step]
        return _DIR_TO_INDEX[(step[0] - start[0], step[1] - start[1])]

    def act(self, agent_id: int, obs, ctx: ObsContext) -> np.ndarray:
        action = self._noop()
        layout = self.layout
        entity_rows = layout.slice(obs, "entity")
        me = entity_rows[self._self_row(entity_rows)]
        side = self.cfg.effective("MAP_CENTER") + 2 * worldgen.MAP_BORDER
        center = worldgen.MAP_BORDER + (self.cfg.effective("MAP_CENTER") - 1) // 2
        my_r = round(me[EF_ROW] * side)
        my_c = round(me[EF_COL] * side)
        dr, dc = center - my_r, center - my_c
        if dr == 0 and dc == 0:
            return action
        move_mask = ctx.masks["move"]
        noop = len(move_mask) - 1
        window = layout.window
        tiles = layout.slice(obs, "tile").reshape(window, window, -1)
        visits = self._visits.setdefault(agent_id, {})
        visits[(my_r, my_c)] = visits.get((my_r, my_c), 0) + 1

        # Races outlast the food gauge; refuel before resuming the run.
        if self._forage_step(action, tiles, window // 2, me, move_mask):
            return action

        planned = self._window_step(tiles, dr, dc, my_r, my_c, visits)
        if planned is not None:
            self._nav.pop(agent_id, None)
            if move_mask[planned]:
                self._blocked[agent_id] = 0
                action[0] = planned
                return action
            # Transiently blocked by another body: wait briefly, then jiggle.
            waited = self._blocked.get(agent_id, 0) + 1
            self._blocked[agent_id] = waited
            if waited <= 2:
                return action
            legal = np.flatnonzero(move_mask[:noop])
            if len(legal):
                action[0] = int(legal[self.rng.integers(len(legal))])
            return action

        # No improving tile in sight: trace the obstacle boundary.
        nav = self._nav.get(agent_id)
        distance = max(abs(dr), abs(dc))
        if nav is None:
            hand = self._hand.setdefault(
                agent_id, 1 if self.rng.random() < 0.5 else -1)
            heading = 2 if abs(dr) >= abs(dc) else 0
            nav = {"hand": hand, "heading": heading, "best": distance, "age": 0}
        nav["age"] += 1
        if nav["age"] > 40:
            # Pathological trace (dead-end dance): flip the hand and restart.
            self._hand[agent_id] = -nav["hand"]
            nav = {"hand": -nav["hand"], "heading": _REVERSE[nav["heading"]],
                   "best": distance, "age": 0}
        first = _CLOCKWISE if nav["hand"] > 0 else _COUNTERCW
        second = _COUNTERCW if nav["hand"] > 0 else _CLOCKWISE
        heading = nav["heading"]
        for candidate in (first[heading], heading, second[heading],
                          _REVERSE[heading]):
            if move_mask[candidate]:
                nav["heading"] = candidate
                action[0] = candidate
                break
        self._nav[agent_id] = nav
        return action


class NoopPolicy(Policy):
    identity = "noop"
    needs_obs = False

    def act(self, agent_id: int, obs, ctx: ObsContext) -> np.ndarray:
        return self._noop()


def scripted_policies() -> dict[str, type]:
    return {
        "random_valid": RandomValidPolicy,
        "forager": ForagerPolicy,
        "brawler": BrawlerPolicy,
        "racer": RacerPolicy,
        "noop": NoopPolicy,
    }


def make_policy(name: str) -> Policy:
    registry = scripted_policies()
    if name not in registry:
        raise KeyError(f"unknown policy {name!r}; have {sorted(registry)}")
    return registry[name]()
