"""Throughput benchmark: agent-steps per second for simulation plus codec.

Observation assembly is forced on for every agent (that is the codec being
measured); policy inference time is tracked separately and excluded from the
reported throughput.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .arena import _apply_assignments
from .config import new_config
from .engine import Simulation, _mix_seed
from .minigames import GameHistory, MinigameKind, setup_episode
from .policies import make_policy


@dataclass
class BenchmarkReport:
    profile: str
    kind: str
    episodes: int
    agent_steps: int = 0
    sim_seconds: float = 0.0
    obs_seconds: float = 0.0
    policy_seconds: float = 0.0
    wall_seconds: float = 0.0
    ticks: int = 0
    phase_breakdown: dict = field(default_factory=dict)

    @property
    def throughput(self) -> float:
        denom = self.sim_seconds + self.obs_seconds
        return self.agent_steps / denom if denom > 0 else 0.0

    def summary(self) -> str:
        return (f"{self.profile}/{self.kind}: {self.agent_steps} agent-steps "
                f"over {self.ticks} ticks in {self.episodes} episodes; "
                f"throughput {self.throughput:,.0f} steps/s "
                f"(sim {self.sim_seconds:.2f}s, obs {self.obs_seconds:.2f}s, "
                f"policy {self.policy_seconds:.2f}s excluded)")


def _bench_episode(kind: MinigameKind, profile: str, seed: int,
                   policy_name: str, originals, history: GameHistory,
                   report: BenchmarkReport) -> None:
    cfg = new_config(profile)
    _apply_assignments(cfg, originals, original=True)
    setup_rng = np.random.Generator(np.random.PCG64(_mix_seed(seed, 0x5E7)))
    setup = setup_episode(kind, cfg, history, setup_rng)
    sim = Simulation(cfg, setup, seed)
    policy = make_policy(policy_name)
    policy.reset(sim.layout, cfg, seed)

    while not sim.done:
        living = [a for a in sim.player_ids if sim.entities[a].alive]
        t0 = time.perf_counter()
        views = sim.observe_batch(want_features=True)
        t1 = time.perf_counter()
        actions = {a: policy.act(a, views[a][0], views[a][1]) for a in living}
        t2 = time.perf_counter()
        sim.step(actions)
        t3 = time.perf_counter()
        report.obs_seconds += t1 - t0
        report.policy_seconds += t2 - t1
        report.sim_seconds += t3 - t2
        report.agent_steps += len(living)
        report.ticks += 1
    history.record(sim.winner is not None, setup.difficulty)


def benchmark(profile: str, kind: MinigameKind | str = MinigameKind.SURVIVAL,
              episodes: int = 2, policy: str = "random_valid",
              originals: tuple = (), base_seed: int = 0) -> BenchmarkReport:
    """Serial benchmark over a few seeded episodes; zero episodes reports 0."""
    if isinstance(kind, str):
        kind = MinigameKind(kind)
    report = BenchmarkReport(profile=profile, kind=kind.value, episodes=episodes)
    history = GameHistory()
    started = time.perf_counter()
    for i in range(episodes):
        _bench_episode(kind, profile, _mix_seed(base_seed, i + 1), policy,
                       originals, history, report)
    report.wall_seconds = time.perf_counter() - started
    report.phase_breakdown = {
        "sim": report.sim_seconds, "obs": report.obs_seconds,
        "policy": report.policy_seconds,
    }
    return report


@dataclass
class PackReport:
    """Aggregate throughput over a profile's whole game pack.

    Packs are what training workloads actually sample from, so this is the
    apples-to-apples comparison: five minigames for mini, three for full.
    """

    profile: str
    reports: list
    episodes_per_kind: int

    @property
    def agent_steps(self) -> int:
        return sum(r.agent_steps for r in self.reports)

    @property
    def throughput(self) -> float:
        denom = sum(r.sim_seconds + r.obs_seconds for r in self.reports)
        return self.agent_steps / denom if denom > 0 else 0.0

    def summary(self) -> str:
        lines = [r.summary() for r in self.reports]
        lines.append(f"{self.profile} pack aggregate: "
                     f"{self.throughput:,.0f} agent-steps/s")
        return "\n".join(lines)


def benchmark_pack(profile: str, episodes_per_kind: int = 2,
                   base_seed: int = 0) -> PackReport:
    """Benchmark every minigame in the profile's default game pack."""
    from .minigames import default_pack
    reports = [benchmark(profile, kind, episodes=episodes_per_kind,
                         base_seed=base_seed)
               for kind, _weight in default_pack(profile).entries]
    return PackReport(profile=profile, reports=reports,
                      episodes_per_kind=episodes_per_kind)


def _parallel_job(args):
    kind, profile, seed, policy, originals = args
    report = BenchmarkReport(profile=profile, kind=kind, episodes=1)
    _bench_episode(MinigameKind(kind), profile, seed, policy, list(originals),
                   GameHistory(), report)
    return report.agent_steps


def benchmark_parallel(profile: str, kind: MinigameKind | str, episodes: int,
                       workers: int, policy: str = "random_valid",
                       originals: tuple = (), base_seed: int = 0) -> tuple[int, float]:
    """(total agent-steps, wall seconds) across worker processes."""
    if isinstance(kind, str):
        kind = MinigameKind(kind)
    jobs = [(kind.value, profile, _mix_seed(base_seed, i + 1), policy,
             tuple(originals)) for i in range(episodes)]
    started = time.perf_counter()
    if workers <= 1:
        steps = sum(_parallel_job(job) for job in jobs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            steps = sum(pool.map(_parallel_job, jobs))
    return steps, time.perf_counter() - started
