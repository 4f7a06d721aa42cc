"""Beam-aware training of search policies.

The package builds beam search over tree-structured search spaces, scores
nodes with linear models, collects beam trajectories under several roll-in
strategies, trains with surrogate losses and online updates, and reports
regret diagnostics.
"""

from .beam_search import Beam, beam_cost, beam_search, best, expand, policy_step, transition_cost
from .data_collection import Strategy, Trajectory, beam_trajectory, parse_strategy
from .diagnostics import RegretTracker, alpha_hat, azuma_eta, empirical_regret, loss_bound_u, stopreset_bound
from .errors import BeamLearnError, ConfigurationError, PreconditionError, StructuralError
from .learner import learn
from .losses import LOSSES, LossResult, NeighborScoring, get_loss
from .scoring import FeatureVector, LinearScorer
from .search_space import CompletionCostTable, TreeSpace, optimal_completion_cost
from .tasks import Example, SequenceTask, generate_dataset, hamming_space

__version__ = "0.1.0"

__all__ = [
    "Beam",
    "beam_cost",
    "beam_search",
    "best",
    "expand",
    "policy_step",
    "transition_cost",
    "Strategy",
    "Trajectory",
    "beam_trajectory",
    "parse_strategy",
    "RegretTracker",
    "alpha_hat",
    "azuma_eta",
    "empirical_regret",
    "loss_bound_u",
    "stopreset_bound",
    "BeamLearnError",
    "ConfigurationError",
    "PreconditionError",
    "StructuralError",
    "learn",
    "LOSSES",
    "LossResult",
    "NeighborScoring",
    "get_loss",
    "FeatureVector",
    "LinearScorer",
    "CompletionCostTable",
    "TreeSpace",
    "optimal_completion_cost",
    "Example",
    "SequenceTask",
    "generate_dataset",
    "hamming_space",
]
