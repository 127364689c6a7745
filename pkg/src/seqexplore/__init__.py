"""Gridworld engine for sequential embodied question answering and navigation."""

from .agent import Agent, AgentConfig
from .explore import ScoringWeights
from .memory import SpatialMemory
from .reasoner import RuleOracle
from .runner import EpisodeSettings, replay, run_episode
from .tasks import Episode, Goal, load_episodes
from .world import SensorModel, load_scenario

__version__ = "0.1.0"

__all__ = [
    "Agent",
    "AgentConfig",
    "Episode",
    "EpisodeSettings",
    "Goal",
    "RuleOracle",
    "ScoringWeights",
    "SensorModel",
    "SpatialMemory",
    "load_episodes",
    "load_scenario",
    "replay",
    "run_episode",
]
