"""Coarse correlated equilibria in layered Markov games with per-agent linear features."""

from .game import (CompositePolicy, LinearMarkovGame, MarkovJointPolicy, MixturePolicy, StateId,
                   Trajectory, exact_q_kernel, markovize, one_hot_tabular_embedding,
                   sample_episodes, sample_trajectory, validate_game)
from .params import HyperParams, Schedule
from .rng import Streams, make_generator

__version__ = "0.1.0"

__all__ = [
    "CompositePolicy", "HyperParams", "LinearMarkovGame", "MarkovJointPolicy", "MixturePolicy",
    "Schedule", "StateId", "Streams", "Trajectory", "exact_q_kernel", "make_generator", "markovize",
    "one_hot_tabular_embedding", "sample_episodes", "sample_trajectory", "validate_game",
]
