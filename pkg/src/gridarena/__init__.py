"""Deterministic many-agent gridworld minigame engine with an evaluation arena."""

from .arena import EpisodeJob, EpisodeResult, evaluate, run_episode, run_jobs
from .config import GameConfig, new_config, team_assignments
from .defaults import Subsystem
from .elo import EloTable, elo_ratings, pairwise_records
from .engine import Simulation
from .minigames import GameHistory, GamePack, MinigameKind, sample_game, setup_episode
from .obs import ObservationLayout
from .policies import Policy, make_policy, scripted_policies
from .tasks import TaskSpec, evaluation_suite, normalized_score

__version__ = "0.1.0"

__all__ = [
    "EloTable",
    "EpisodeJob",
    "EpisodeResult",
    "GameConfig",
    "GameHistory",
    "GamePack",
    "MinigameKind",
    "ObservationLayout",
    "Policy",
    "Simulation",
    "Subsystem",
    "TaskSpec",
    "elo_ratings",
    "evaluate",
    "evaluation_suite",
    "make_policy",
    "new_config",
    "normalized_score",
    "pairwise_records",
    "run_episode",
    "run_jobs",
    "sample_game",
    "scripted_policies",
    "setup_episode",
    "team_assignments",
]
