"""Episode engine: world state plus the fixed tick pipeline.

Pipeline per tick: action intake -> movement -> attacks -> item/market ->
metabolism -> fog damage -> NPC spawn & regeneration -> death culling ->
win/task bookkeeping -> event flush.  Within a phase, conflicts resolve by
ascending entity id, so replays are invariant to caller iteration order.
"""

from __future__ import annotations

import numpy as np

from . import economy, entities as ent, minigames, tasks, worldgen
from .config import GameConfig
from .defaults import Subsystem
from .economy import Market
from .errors import (
    ConfigInvalid,
    EmptySlot,
    EpisodeFinished,
    InsufficientGold,
    InventoryFull,
    LevelTooLow,
    WrongTile,
)
from .events import EventLog, EventType, GameEvent
from .minigames import EpisodeSetup, MinigameKind
from .obs import ActionBundle, ObsBuilder, decode_and_validate
from .tasks import ShapingWeights, TaskAssignment, TaskSpec, task_flags

DROP_DESPAWN_TICKS = 50


def _mix_seed(seed: int, salt: int) -> int:
    return (seed * 6364136223846793005 + salt) % (1 << 63)


class Simulation:
    """One live episode.  Owned by a single thread; all randomness flows
    through the per-episode generator in fixed pipeline order."""

    def __init__(self, cfg: GameConfig, setup: EpisodeSetup, seed: int,
                 shaping: ShapingWeights | None = None):
        violations = cfg.validate()
        if violations:
            raise ConfigInvalid("; ".join(str(v) for v in violations))
        self.cfg = cfg
        self.setup = setup
        self.seed = seed
        self.rng = np.random.Generator(np.random.PCG64(seed & ((1 << 63) - 1)))
        self.shaping = shaping or ShapingWeights()

        if cfg.effective("MAP_RESET_FROM_FRACTAL"):
            self.tile_map = worldgen.generate_map(seed, cfg)
        else:
            map_seed = _mix_seed(seed % cfg.effective("MAP_N"), 0x9A9A)
            self.tile_map = worldgen.generate_map(map_seed, cfg)
        self.fog_clock = worldgen.FogClock.from_config(cfg)
        self.fog_grid = np.zeros((self.tile_map.side,) * 2, dtype=np.float64)

        self.is_team_game = setup.team_game
        self.teams: dict[int, list[int]] = cfg.teams() if setup.team_game else {}
        self.leaders: dict[int, int] = {}
        if setup.has_leaders:
            self.leaders = {t: members[0] for t, members in self.teams.items()}

        spawn_teams = self.teams if setup.team_game else None
        self.entities: dict[int, ent.Entity] = ent.spawn_players(
            setup.spawn_mode, spawn_teams, self.tile_map, self.rng, cfg)
        self.player_ids = sorted(self.entities)
        self.team_of = {a: e.team for a, e in self.entities.items()}
        self.gold_minted = sum(e.gold for e in self.entities.values())

        self.tick = 0
        self.winner: tuple | None = None
        self.done = False
        self.next_npc_id = -1
        self._npcs_spawned = 0
        self.market = Market()
        self.drops: dict[tuple[int, int], list] = {}
        self.log = EventLog()
        self.counters = tasks.EventCounters()
        self._tick_events: list[GameEvent] = []
        self._hold: dict[int, int] = {t: 0 for t in self.teams}
        self._ctx: dict[int, object] = {}
        self._action_record: dict[int, list] = {}
        self.tick_actions: list[dict] = []  # replay: per tick {agent: [ints]}

        self.assignments: list[TaskAssignment] = []
        self._own_task: dict[int, int] = {}
        self._team_tasks: dict[int, list[int]] = {}
        self._occupy_best: dict[int, int] = {}
        self._assign_tasks()

        flags = task_flags(cfg, setup.team_game)
        self._embeddings: dict[int, np.ndarray] = {}
        embed_dim = 11 + cfg.effective("TASK_EMBED_DIM")
        for agent_id in self.player_ids:
            idx = self._own_task.get(agent_id)
            if idx is None:
                team = self.team_of.get(agent_id)
                team_idx = self._team_tasks.get(team, [None])[0]
                idx = team_idx
            if idx is None:
                self._embeddings[agent_id] = np.zeros(embed_dim, dtype=np.float32)
            else:
                self._embeddings[agent_id] = tasks.embed_task(
                    self.assignments[idx].spec, flags)

        self.cumulative_reward: dict[int, float] = {a: 0.0 for a in self.player_ids}
        self.own_task_reward: dict[int, float] = {a: 0.0 for a in self.player_ids}
        self.max_center_progress: dict[int, float] = {a: 0.0 for a in self.player_ids}
        self._shaping_prev: dict[int, tuple] = {}
        self.water_adjacent = ent.water_adjacency(self.tile_map)
        self.passable_static = ent.passable_grid(self.tile_map)
        self.obs_builder = ObsBuilder(self)

    # -- task assignment -------------------------------------------------------

    def _assign_tasks(self) -> None:
        plan = self.setup.task_plan
        horizon = self.cfg.effective("HORIZON")
        make = TaskSpec.make

        def add(spec: TaskSpec, assignee: int, scope: str) -> int:
            self.assignments.append(TaskAssignment(spec, assignee, scope))
            return len(self.assignments) - 1

        if plan == "multitask":
            suite = tasks.evaluation_suite()
            for agent_id in self.player_ids:
                spec = suite[int(self.rng.integers(len(suite)))]
                self._own_task[agent_id] = add(spec, agent_id, "agent")
        elif plan == "race":
            spec = make("ReachCenterFirst", "Exploration")
            for agent_id in self.player_ids:
                self._own_task[agent_id] = add(spec, agent_id, "agent")
        elif plan == "koh":
            spec = make("SeizeCenter", "Exploration",
                        duration=self.setup.hold_duration)
            for team in sorted(self.teams):
                self._team_tasks.setdefault(team, []).append(add(spec, team, "team"))
        else:
            tick_spec = make("TickGE", "Survival", num_tick=horizon)
            for agent_id in self.player_ids:
                self._own_task[agent_id] = add(tick_spec, agent_id, "agent")
            if plan == "ptk":
                spec = make("ProtectLeader", "Survival")
                for team in sorted(self.teams):
                    self._team_tasks.setdefault(team, []).append(
                        add(spec, team, "team"))
            elif plan == "sandwich":
                spec = make("LastTeamStanding", "Survival")
                for team in sorted(self.teams):
                    self._team_tasks.setdefault(team, []).append(
                        add(spec, team, "team"))

    # -- view protocol (tasks, minigames, obs) ------------------------------------

    def emit(self, event: GameEvent) -> None:
        self._tick_events.append(event)
        self.counters.observe(event)

    @property
    def npcs_dead(self) -> int:
        living = sum(1 for e in self.entities.values()
                     if e.alive and not e.is_player)
        return self._npcs_spawned - living

    def team_members(self, team: int) -> list[int]:
        return self.teams.get(team, [])

    def center_hold(self, team: int) -> int:
        return self._hold.get(team, 0)

    def leader_alive(self, team: int) -> bool:
        leader = self.leaders.get(team)
        if leader is None:
            return False
        return self.entities[leader].alive

    def living_teams(self) -> set:
        return {e.team for e in self.entities.values()
                if e.alive and e.is_player and e.team is not None}

    def living_players(self) -> list[ent.Entity]:
        return [self.entities[a] for a in self.player_ids
                if self.entities[a].alive]

    def agents_at_center(self) -> list[int]:
        center = self.tile_map.center
        return sorted(a for a in self.player_ids
                      if self.entities[a].alive and self.entities[a].pos == center)

    def key_visible(self, agent: ent.Entity) -> bool:
        vision = self.cfg.effective("PLAYER_VISION_RADIUS")
        kind = self.setup.kind
        if kind is MinigameKind.PROTECT_THE_KING and agent.team is not None:
            leader_id = self.leaders.get(agent.team)
            if leader_id is None:
                return False
            leader = self.entities[leader_id]
            return leader.alive and ent.chebyshev(agent.pos, leader.pos) <= vision
        if kind in (MinigameKind.RACE_TO_CENTER, MinigameKind.KING_OF_THE_HILL,
                    MinigameKind.SANDWICH):
            return ent.chebyshev(agent.pos, self.tile_map.center) <= vision
        return False

    def key_target_id(self, viewer: ent.Entity) -> int | None:
        """Entity id flagged as the viewer's key target (PTK leader)."""
        if self.setup.kind is not MinigameKind.PROTECT_THE_KING \
                or viewer.team is None:
            return None
        return self.leaders.get(viewer.team)

    def task_embedding(self, agent_id: int) -> np.ndarray:
        return self._embeddings[agent_id]

    def task_embedding_matrix(self, agent_ids: list[int]) -> np.ndarray:
        if not hasattr(self, "_embed_matrix"):
            self._embed_matrix = np.stack(
                [self._embeddings[a] for a in self.player_ids])
            self._embed_index = {a: i for i, a in enumerate(self.player_ids)}
        rows = [self._embed_index[a] for a in agent_ids]
        return self._embed_matrix[rows]

    # -- observations ---------------------------------------------------------------

    def observe(self, agent_id: int, want_features: bool = True):
        obs, ctx = self.obs_builder.build(agent_id, want_features)
        self._ctx[agent_id] = ctx
        return obs, ctx

    def observe_batch(self, want_features: bool = True) -> dict[int, tuple]:
        """(obs, ctx) for every player at once via the batched builder."""
        views = self.obs_builder.build_batch(self.player_ids, want_features)
        for agent_id, (_obs, ctx) in views.items():
            self._ctx[agent_id] = ctx
        return views

    def observe_all(self, want_features: bool = True) -> dict[int, np.ndarray | None]:
        return {a: view[0] for a, view in self.observe_batch(want_features).items()}

    @property
    def layout(self):
        return self.obs_builder.layout

    # -- stepping ----------------------------------------------------------------------

    def step(self, actions: dict):
        """Advance one tick.  ``actions`` maps agent id -> flat vector or bundle."""
        if self.done:
            raise EpisodeFinished(f"episode ended at tick {self.tick}")
        self.tick += 1
        cfg = self.cfg
        tick = self.tick

        if self.fog_clock.onset is not None and tick >= self.fog_clock.onset:
            self.fog_grid = worldgen.fog_depth_grid(tick, self.fog_clock,
                                                    self.tile_map)
        for e in self.entities.values():
            e.damage_taken_last_tick = 0
        self._expire_drops()

        # Phase: action intake.
        alive_at_start = {a for a in self.player_ids if self.entities[a].alive}
        bundles: dict[int, ActionBundle] = {}
        record: dict[int, list] = {}
        for agent_id in sorted(alive_at_start):
            action = actions.get(agent_id)
            if isinstance(action, ActionBundle):
                bundles[agent_id] = action
                continue
            ctx = self._ctx.get(agent_id)
            if ctx is None:
                _, ctx = self.observe(agent_id, want_features=False)
            if action is None:
                bundles[agent_id] = ActionBundle()
            else:
                record[agent_id] = [int(v) for v in np.asarray(action).reshape(-1)]
                bundles[agent_id] = decode_and_validate(action, ctx, cfg)
        minigames.team_mask_actions(bundles, self.entities, self.is_team_game)
        self.tick_actions.append(record)
        self._ctx.clear()

        if cfg.enabled(Subsystem.COMMUNICATION):
            for agent_id in sorted(bundles):
                token = bundles[agent_id].comm_token
                if token is not None:
                    self.entities[agent_id].latest_token = token

        npc_plans = ent.npc_decide_all(self, self.rng)

        # Phase: movement (ascending id; NPCs have negative ids and go first).
        profession_on = cfg.enabled(Subsystem.PROFESSION)
        item_on = cfg.enabled(Subsystem.ITEM)
        for eid in sorted(self.entities):
            e = self.entities[eid]
            if not e.alive:
                continue
            if e.is_player:
                if eid not in bundles:
                    continue
                ent.resolve_move(e, bundles[eid].move, self.tile_map, cfg,
                                 self.passable_static)
                disp = ent.chebyshev(e.pos, e.spawn_pos)
                if disp > e.max_displacement:
                    e.max_displacement = disp
                    self.emit(GameEvent(tick, eid, EventType.GO_FARTHEST,
                                        distance=disp, row=e.pos[0], col=e.pos[1]))
                progress = self.tile_map.dist_edge[e.pos] / max(
                    1, (self.tile_map.playable - 1) // 2)
                if progress > self.max_center_progress[eid]:
                    self.max_center_progress[eid] = float(progress)
                if item_on and e.pos in self.drops:
                    self._pickup(e)
                if profession_on:
                    try:
                        for event in economy.harvest_profession(
                                e, self.tile_map, self.rng, cfg, tick, self.drops):
                            self.emit(event)
                    except WrongTile:
                        pass
            else:
                ent.resolve_move(e, npc_plans[eid][0], self.tile_map, cfg,
                                 self.passable_static)

        # Phase: attacks.
        if cfg.enabled(Subsystem.COMBAT):
            for eid in sorted(self.entities):
                attacker = self.entities[eid]
                if not attacker.alive:
                    continue
                if attacker.is_player:
                    bundle = bundles.get(eid)
                    if bundle is None or bundle.attack_target is None:
                        continue
                    target = self.entities.get(bundle.attack_target)
                    style = ent.STYLES[bundle.attack_style]
                else:
                    plan = npc_plans.get(eid)
                    if plan is None or plan[1] is None:
                        continue
                    style, target_id = plan[1]
                    target = self.entities.get(target_id)
                if target is None or not target.alive:
                    continue
                for event in ent.resolve_attack(attacker, target, style, self):
                    self.emit(event)

        # Phase: items and market.
        if cfg.profile == "full" and cfg.enabled(Subsystem.ITEM):
            self._item_market_phase(bundles)

        # Phase: metabolism.
        if cfg.enabled(Subsystem.RESOURCE):
            for eid in sorted(alive_at_start):
                e = self.entities[eid]
                if e.alive:
                    for event in ent.metabolism_tick(e, self):
                        self.emit(event)

        # Phase: fog damage.
        ent.fog_damage_tick(self)

        # Phase: NPC spawning and resource regeneration.
        if cfg.enabled(Subsystem.NPC):
            for region in self.setup.npc_regions:
                for npc in ent.npc_spawn_tick(self, self.rng, region):
                    self.entities[npc.id] = npc
                    self._npcs_spawned += 1
                    self.gold_minted += npc.gold
        if cfg.enabled(Subsystem.RESOURCE) or cfg.enabled(Subsystem.PROFESSION):
            worldgen.tick_regeneration(self.tile_map, self.rng)

        # Phase: death culling.
        for eid in sorted(self.entities):
            e = self.entities[eid]
            if e.alive and e.health <= 0:
                for event in ent.kill_entity(e, self):
                    self.emit(event)
        if self.setup.has_leaders:
            for team, leader_id in self.leaders.items():
                if not self.entities[leader_id].alive:
                    for member in self.teams[team]:
                        e = self.entities[member]
                        if e.alive:
                            for event in ent.kill_entity(e, self):
                                self.emit(event)

        # Phase: objective bookkeeping, winner, tasks, rewards.
        if self.setup.kind is MinigameKind.KING_OF_THE_HILL:
            center = self.tile_map.center
            holders = set()
            for agent_id in self.agents_at_center():
                team = self.team_of.get(agent_id)
                if team is not None:
                    holders.add(team)
                    self.emit(GameEvent(tick, agent_id, EventType.SEIZE_TILE,
                                        row=center[0], col=center[1], distance=0))
            for team in self._hold:
                self._hold[team] = self._hold[team] + 1 if team in holders else 0

        if self.winner is None:
            self.winner = minigames.check_winner(self.setup, self)

        self._occupy_breadcrumbs()
        rewards = self._update_tasks(alive_at_start)

        for event in self._tick_events:
            self.log.append(event)
        self._tick_events = []

        players_left = any(self.entities[a].alive for a in self.player_ids)
        if tick >= cfg.effective("HORIZON") or self.winner is not None \
                or not players_left:
            self.done = True
        dones = {a: (not self.entities[a].alive) or self.done
                 for a in alive_at_start}
        info = {"tick": tick, "winner": self.winner,
                "alive": sum(1 for a in self.player_ids if self.entities[a].alive)}
        return rewards, dones, info

    # -- helpers ----------------------------------------------------------------

    def _pickup(self, e: ent.Entity) -> None:
        """Walk-over loot pickup: whatever fits moves into the inventory."""
        pile = self.drops.get(e.pos, [])
        left = [(t, item) for t, item in pile
                if not economy.add_to_inventory(e, item, self.cfg)]
        if left:
            self.drops[e.pos] = left
        else:
            self.drops.pop(e.pos, None)

    def _expire_drops(self) -> None:
        if not self.drops:
            return
        cutoff = self.tick - DROP_DESPAWN_TICKS
        for pos in list(self.drops):
            pile = [(t, item) for t, item in self.drops[pos] if t > cutoff]
            if pile:
                self.drops[pos] = pile
            else:
                del self.drops[pos]

    def _item_market_phase(self, bundles: dict[int, ActionBundle]) -> None:
        cfg = self.cfg
        tick = self.tick
        for eid in sorted(bundles):
            e = self.entities[eid]
            if not e.alive:
                continue
            bundle = bundles[eid]
            if bundle.use_slot is not None:
                try:
                    for event in economy.use_item(e, bundle.use_slot, cfg, tick):
                        self.emit(event)
                except (EmptySlot, LevelTooLow):
                    pass
            if bundle.destroy_slot is not None \
                    and bundle.destroy_slot < len(e.inventory):
                item = e.inventory[bundle.destroy_slot]
                if not item.equipped and item.listed_price is None:
                    e.inventory.pop(bundle.destroy_slot)
                    self.emit(GameEvent(tick, eid, EventType.DESTROY_ITEM,
                                        item=item.type.value, level=item.level,
                                        quantity=item.quantity))
            if bundle.give_target is not None and bundle.give_slot is not None \
                    and bundle.give_slot < len(e.inventory):
                target = self.entities.get(bundle.give_target)
                item = e.inventory[bundle.give_slot]
                if target is not None and target.alive and not item.equipped \
                        and item.listed_price is None:
                    if economy.add_to_inventory(target, item, cfg):
                        e.inventory.pop(bundle.give_slot)
                        self.emit(GameEvent(tick, eid, EventType.GIVE_ITEM,
                                            target=target.id, item=item.type.value,
                                            level=item.level, quantity=item.quantity))
            if bundle.gold_target is not None and bundle.gold_amount is not None:
                target = self.entities.get(bundle.gold_target)
                amount = min(bundle.gold_amount, e.gold)
                if target is not None and target.alive and amount > 0:
                    e.gold -= amount
                    target.gold += amount
                    self.emit(GameEvent(tick, eid, EventType.GIVE_GOLD,
                                        target=target.id, gold=amount))

        if not cfg.enabled(Subsystem.EXCHANGE):
            return
        for listing in self.market.expire(tick):
            seller = self.entities.get(listing.seller)
            if seller is not None and seller.alive \
                    and economy.add_to_inventory(seller, listing.item, cfg):
                continue
            pos = seller.pos if seller is not None else self.tile_map.center
            self.drops.setdefault(pos, []).append((tick, listing.item))
        duration = cfg.effective("EXCHANGE_LISTING_DURATION")
        for eid in sorted(bundles):
            e = self.entities[eid]
            bundle = bundles[eid]
            if not e.alive or bundle.sell_slot is None \
                    or bundle.sell_slot >= len(e.inventory):
                continue
            item = e.inventory[bundle.sell_slot]
            if item.equipped or item.listed_price is not None:
                continue
            e.inventory.pop(bundle.sell_slot)
            self.market.list_item(eid, item, bundle.sell_price, tick, duration)
            self.emit(GameEvent(tick, eid, EventType.LIST_ITEM,
                                item=item.type.value, level=item.level,
                                gold=bundle.sell_price))
        for eid in sorted(bundles):
            e = self.entities[eid]
            bundle = bundles[eid]
            if not e.alive or bundle.buy_listing is None:
                continue
            listing = self.market.listings.get(bundle.buy_listing)
            if listing is None or listing.seller == eid:
                continue
            seller = self.entities.get(listing.seller)
            if seller is None:
                continue
            try:
                for event in economy.settle_buy(e, seller, self.market,
                                                bundle.buy_listing, cfg, tick):
                    self.emit(event)
            except (InsufficientGold, InventoryFull):
                pass

    def _occupy_breadcrumbs(self) -> None:
        for idx, assignment in enumerate(self.assignments):
            if assignment.spec.predicate != "OccupyTile":
                continue
            e = self.entities.get(assignment.assignee)
            if e is None or not e.alive:
                continue
            target = (assignment.spec.param("row"), assignment.spec.param("col"))
            d = ent.chebyshev(e.pos, target)
            best = self._occupy_best.get(idx)
            if best is None or d < best:
                self._occupy_best[idx] = d
                self.emit(GameEvent(self.tick, e.id, EventType.SEIZE_TILE,
                                    row=target[0], col=target[1], distance=d))

    def _update_tasks(self, alive_at_start: set) -> dict[int, float]:
        rewards = {a: 0.0 for a in alive_at_start}
        for assignment in self.assignments:
            if assignment.scope == "agent":
                # Progress freezes after death; skip stale evaluations.
                death = self.entities[assignment.assignee].death_tick
                if death is not None and death < self.tick:
                    continue
            progress = tasks.eval_predicate(assignment, self)
            delta = assignment.state.record(progress)
            if delta <= 0:
                continue
            if assignment.scope == "agent":
                if assignment.assignee in rewards:
                    rewards[assignment.assignee] += delta
                    self.own_task_reward[assignment.assignee] += delta
            else:
                for member in self.teams.get(assignment.assignee, ()):
                    if member in rewards:
                        rewards[member] += delta
        if self.shaping.any():
            for agent_id in alive_at_start:
                e = self.entities[agent_id]
                offense, defense = (economy.equipment_stats(e, self.cfg)
                                    if self.cfg.enabled(Subsystem.EQUIPMENT)
                                    else (0, 0))
                now = (e.health, sum(e.xp.values()), offense, defense, e.gold)
                prev = self._shaping_prev.get(agent_id, now)
                deltas = {
                    "health": now[0] - prev[0], "xp": now[1] - prev[1],
                    "offense": now[2] - prev[2], "defense": now[3] - prev[3],
                    "gold": now[4] - prev[4],
                }
                rewards[agent_id] = tasks.shaped_reward(
                    deltas, self.shaping, rewards[agent_id])
                self._shaping_prev[agent_id] = now
        for agent_id, value in rewards.items():
            self.cumulative_reward[agent_id] += value
        return rewards

    # -- episode summary -------------------------------------------------------------

    def lifespans(self) -> dict[int, int]:
        return {a: self.entities[a].time_alive(self.tick) for a in self.player_ids}

    def agent_task_progress(self) -> dict[int, float]:
        """Primary-task max progress per agent (own task, else team task)."""
        out = {}
        for agent_id in self.player_ids:
            idx = self._own_task.get(agent_id)
            if idx is None:
                team = self.team_of.get(agent_id)
                indices = self._team_tasks.get(team, [])
                idx = indices[0] if indices else None
            out[agent_id] = self.assignments[idx].state.max_progress \
                if idx is not None else 0.0
        return out

    def replay_meta(self) -> tasks.ReplayMeta:
        return tasks.ReplayMeta(
            final_tick=self.tick,
            playable=self.tile_map.playable,
            center=self.tile_map.center,
            spawn_tick={a: self.entities[a].spawn_tick for a in self.player_ids},
            teams=dict(self.teams),
            leaders=dict(self.leaders),
            winner=self.winner,
        )
