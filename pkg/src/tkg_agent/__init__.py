"""Model-based agent that plans in text environments with a temporal knowledge graph as memory."""

from .actor_critic import AgentConfig, EpisodeResult, Reflection, Verdict, run_episode
from .kg_store import Entity, EntityType, Fact, TemporalGraph, temporal_order
from .retrieval_qa import Answer, Monologue, Query, graph_qa, run_monologue
from .world_model import BeliefState, PlannedStep, PlannedTrajectory, estimate_state, plan

__version__ = "0.1.0"

__all__ = [
    "AgentConfig", "Answer", "BeliefState", "Entity", "EntityType", "EpisodeResult", "Fact", "Monologue",
    "PlannedStep", "PlannedTrajectory", "Query", "Reflection", "TemporalGraph", "Verdict", "estimate_state",
    "graph_qa", "plan", "run_episode", "run_monologue", "temporal_order",
]
