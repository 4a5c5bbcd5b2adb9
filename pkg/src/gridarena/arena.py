"""Episode runner, tournament loops, scoring reports, and parallel workers."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import replay as replay_mod
from . import tasks
from .config import GameConfig, new_config, _parse_value
from .engine import Simulation, _mix_seed
from .errors import ConfigInvalid
from .minigames import GameHistory, MinigameKind, setup_episode
from .policies import Policy, make_policy
from .tasks import ShapingWeights, evaluation_suite, normalized_score

WINNER_BONUS = 100.0
_SETUP_SALT = 0x5E7


@dataclass
class EpisodeResult:
    kind: str
    seed: int
    winner: tuple | None
    policy_scores: dict
    policy_of: dict
    agent_lifespans: dict
    agent_progress: dict
    agent_rewards: dict
    agent_own_rewards: dict
    agent_tasks: dict  # agent -> (canonical predicate, category, max progress)
    unique_events: int
    mean_center_progress: float
    ticks: int
    wall_time: float

    def to_json(self) -> str:
        out = {
            "kind": self.kind, "seed": self.seed,
            "winner": list(self.winner) if self.winner else None,
            "policy_scores": self.policy_scores,
            "policy_of": {str(k): v for k, v in self.policy_of.items()},
            "agent_lifespans": {str(k): v for k, v in self.agent_lifespans.items()},
            "agent_progress": {str(k): v for k, v in self.agent_progress.items()},
            "agent_rewards": {str(k): v for k, v in self.agent_rewards.items()},
            "agent_own_rewards": {str(k): v for k, v in self.agent_own_rewards.items()},
            "agent_tasks": {str(k): list(v) for k, v in self.agent_tasks.items()},
            "unique_events": self.unique_events,
            "mean_center_progress": self.mean_center_progress,
            "ticks": self.ticks, "wall_time": self.wall_time,
        }
        return json.dumps(out, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EpisodeResult":
        raw = json.loads(text)
        return cls(
            kind=raw["kind"], seed=raw["seed"],
            winner=tuple(raw["winner"]) if raw["winner"] else None,
            policy_scores=raw["policy_scores"],
            policy_of={int(k): v for k, v in raw["policy_of"].items()},
            agent_lifespans={int(k): v for k, v in raw["agent_lifespans"].items()},
            agent_progress={int(k): v for k, v in raw["agent_progress"].items()},
            agent_rewards={int(k): v for k, v in raw["agent_rewards"].items()},
            agent_own_rewards={int(k): v for k, v in raw["agent_own_rewards"].items()},
            agent_tasks={int(k): tuple(v) for k, v in raw["agent_tasks"].items()},
            unique_events=raw["unique_events"],
            mean_center_progress=raw["mean_center_progress"],
            ticks=raw["ticks"], wall_time=raw["wall_time"],
        )


def assign_policies(sim: Simulation, policies: list[Policy]) -> dict[int, Policy]:
    """Round-robin assignment: whole teams in team games, agents otherwise."""
    controller: dict[int, Policy] = {}
    if sim.is_team_game:
        for i, team in enumerate(sorted(sim.teams)):
            policy = policies[i % len(policies)]
            for member in sim.teams[team]:
                controller[member] = policy
    else:
        for i, agent_id in enumerate(sim.player_ids):
            controller[agent_id] = policies[i % len(policies)]
    return controller


def winning_policy(sim: Simulation, policy_of: dict[int, str]) -> str | None:
    if sim.winner is None:
        return None
    kind, winner_id = sim.winner
    if kind == "agent":
        return policy_of.get(winner_id)
    members = sim.teams.get(winner_id, [])
    return policy_of.get(members[0]) if members else None


def game_score(mean_progress: dict[str, float], winner_policy: str | None) -> dict[str, float]:
    """Mean max task progress per policy plus the winner bonus."""
    return {name: progress + (WINNER_BONUS if name == winner_policy else 0.0)
            for name, progress in mean_progress.items()}


def run_episode(kind: MinigameKind | str, policies: list[Policy], seed: int,
                cfg: GameConfig, history: GameHistory | None = None,
                shaping: ShapingWeights | None = None,
                post_overrides: dict | None = None,
                collect_replay: bool = True):
    """Run one seeded episode; returns (EpisodeResult, replay payload or None).

    Deterministic given (kind, policy identities, seed, cfg): the replay
    digest is the witness.
    """
    if isinstance(kind, str):
        kind = MinigameKind(kind)
    history = history if history is not None else GameHistory()
    setup_rng = np.random.Generator(np.random.PCG64(_mix_seed(seed, _SETUP_SALT)))
    setup = setup_episode(kind, cfg, history, setup_rng)
    for key, value in (post_overrides or {}).items():
        cfg.set_for_episode(key, value)

    started = time.perf_counter()
    sim = Simulation(cfg, setup, seed, shaping)
    for policy in policies:
        policy.reset(sim.layout, cfg, seed)
    controller = assign_policies(sim, policies)
    policy_of = {a: p.identity for a, p in controller.items()}

    want_features = any(p.needs_obs for p in policies)
    while not sim.done:
        views = sim.observe_batch(want_features)
        actions = {}
        for agent_id in sim.player_ids:
            if not sim.entities[agent_id].alive:
                continue
            obs, ctx = views[agent_id]
            actions[agent_id] = controller[agent_id].act(agent_id, obs, ctx)
        sim.step(actions)
    wall = time.perf_counter() - started

    progress = sim.agent_task_progress()
    by_policy: dict[str, list[float]] = {}
    for agent_id, name in policy_of.items():
        by_policy.setdefault(name, []).append(progress[agent_id])
    mean_progress = {name: float(np.mean(vals)) for name, vals in by_policy.items()}
    scores = game_score(mean_progress, winning_policy(sim, policy_of))

    agent_tasks = {}
    for agent_id in sim.player_ids:
        idx = sim._own_task.get(agent_id)
        if idx is None:
            team = sim.team_of.get(agent_id)
            indices = sim._team_tasks.get(team, [])
            idx = indices[0] if indices else None
        if idx is not None:
            assignment = sim.assignments[idx]
            agent_tasks[agent_id] = (assignment.spec.canonical(),
                                     assignment.spec.category,
                                     assignment.state.max_progress)

    result = EpisodeResult(
        kind=kind.value, seed=seed, winner=sim.winner,
        policy_scores=scores, policy_of=policy_of,
        agent_lifespans=sim.lifespans(), agent_progress=progress,
        agent_rewards=dict(sim.cumulative_reward),
        agent_own_rewards=dict(sim.own_task_reward),
        agent_tasks=agent_tasks,
        unique_events=sim.log.unique_event_types(),
        mean_center_progress=float(np.mean(list(sim.max_center_progress.values())))
        if sim.max_center_progress else 0.0,
        ticks=sim.tick, wall_time=wall,
    )
    history.record(sim.winner is not None, setup.difficulty)
    payload = replay_mod.build_payload(sim, policy_of) if collect_replay else None
    return result, payload


# --- parallel episode execution ----------------------------------------------------


@dataclass(frozen=True)
class EpisodeJob:
    kind: str
    policy_names: tuple
    seed: int
    profile: str = "mini"
    originals: tuple = ()       # ("KEY=VALUE", ...) baked in before setup
    post_overrides: tuple = ()  # applied after minigame setup
    collect_replay: bool = True


def _apply_assignments(cfg: GameConfig, assignments, original: bool) -> None:
    for text in assignments:
        key, value = text.split("=", 1)
        parsed = _parse_value(value)
        if original:
            cfg.set_original(key.strip(), parsed)
        else:
            cfg.set_for_episode(key.strip(), parsed)


def run_job(job: EpisodeJob):
    """Worker entry point: build everything from plain data, run, digest."""
    cfg = new_config(job.profile)
    _apply_assignments(cfg, job.originals, original=True)
    policies = [make_policy(name) for name in job.policy_names]
    post = {}
    for kv in job.post_overrides:
        key, value = kv.split("=", 1)
        post[key.strip()] = _parse_value(value)
    result, payload = run_episode(job.kind, policies, job.seed, cfg,
                                  post_overrides=post or None,
                                  collect_replay=job.collect_replay)
    digest = replay_mod.payload_digest(payload) if payload is not None else None
    return result, digest


def run_jobs(jobs: list[EpisodeJob], workers: int = 1):
    """Run jobs serially or across processes; order of results matches jobs."""
    if workers <= 1:
        return [run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_job, jobs))


# --- evaluation loops ---------------------------------------------------------------


def evaluate(kind: MinigameKind | str, policy_names: list[str], episodes: int,
             seeds: list[int], cfg: GameConfig, out_dir=None,
             originals: tuple = ()) -> list[EpisodeResult]:
    """Tournament loop: `episodes` per base seed, one result record each."""
    if isinstance(kind, str):
        kind = MinigameKind(kind)
    results = []
    out_path = Path(out_dir) if out_dir is not None else None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
    history = GameHistory()
    for base_seed in seeds:
        for i in range(episodes):
            episode_seed = _mix_seed(base_seed, i + 1)
            policies = [make_policy(name) for name in policy_names]
            episode_cfg = new_config(cfg.profile)
            _apply_assignments(episode_cfg, originals, original=True)
            result, _ = run_episode(kind, policies, episode_seed, episode_cfg,
                                    history=history, collect_replay=False)
            results.append(result)
            if out_path is not None:
                name = f"result_{kind.value}_{base_seed}_{i:04d}.json"
                (out_path / name).write_text(result.to_json())
    return results


def load_results(results_dir, prefix: str = "result_") -> list[EpisodeResult]:
    out = []
    for path in sorted(Path(results_dir).glob(f"{prefix}*.json")):
        out.append(EpisodeResult.from_json(path.read_text()))
    if not out:
        raise ConfigInvalid(f"no result records in {results_dir}")
    return out


def task_completion_report(results: list[EpisodeResult]) -> dict:
    """Per-policy lifespan, completion rate, and normalized 63-task score."""
    suite = {spec.canonical(): spec for spec in evaluation_suite()}
    report: dict[str, dict] = {}
    per_policy: dict[str, dict] = {}
    for result in results:
        for agent_id, name in result.policy_of.items():
            bucket = per_policy.setdefault(
                name, {"lifespans": [], "completions": [],
                       "task_progress": {c: [] for c in suite}})
            bucket["lifespans"].append(result.agent_lifespans[agent_id])
            record = result.agent_tasks.get(agent_id)
            if record is None:
                continue
            canonical, _category, progress = record
            bucket["completions"].append(1.0 if progress >= 1.0 else 0.0)
            if canonical in bucket["task_progress"]:
                bucket["task_progress"][canonical].append(progress)
    for name, bucket in per_policy.items():
        per_task = {}
        for canonical, spec in suite.items():
            values = bucket["task_progress"][canonical]
            per_task[spec] = float(np.mean(values)) if values else 0.0
        report[name] = {
            "mean_lifespan": float(np.mean(bucket["lifespans"]))
            if bucket["lifespans"] else 0.0,
            "completion_rate": float(np.mean(bucket["completions"]))
            if bucket["completions"] else 0.0,
            "normalized_score": normalized_score(per_task),
        }
    return report
