"""Roll-in: collecting beam trajectories and the loss inputs along them.

A trajectory over a space of depth ``h`` has up to ``h`` transitions.  At
each non-final beam the candidates, their learned scores and their
completion costs are recorded; these are the inputs of the surrogate loss
incurred at that beam.

At the last layer every candidate is terminal and the successor is a
singleton, so loss inputs recorded there use beam width 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .beam_search import Beam, beam_cost, expand, initial_beam, oracle_scores, policy_step, rank, select_successor
from .errors import ConfigurationError, PreconditionError
from .losses import NeighborScoring

__all__ = [
    "Strategy",
    "parse_strategy",
    "CollectedStep",
    "Trajectory",
    "oracle_step",
    "detect_cost_increase",
    "beam_trajectory",
    "make_rng",
]

_KINDS = ("oracle", "stop", "reset", "continue", "interp")


@dataclass(frozen=True)
class Strategy:
    """Data collection strategy; ``beta`` only for ``interp``."""

    kind: str
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigurationError(f"unknown strategy {self.kind!r}; expected one of {_KINDS}")
        if (self.kind == "interp") != (self.beta is not None):
            raise ConfigurationError("beta is required for interp and only for interp")
        if self.beta is not None and not 0.0 <= self.beta <= 1.0:
            raise ConfigurationError(f"interp beta must lie in [0, 1], got {self.beta}")

    def __str__(self):
        return f"interp:{self.beta:g}" if self.kind == "interp" else self.kind


def parse_strategy(text: str | Strategy) -> Strategy:
    """Parse ``oracle | stop | reset | continue | interp:<beta>``."""
    if isinstance(text, Strategy):
        return text
    text = text.strip().lower()
    if text.startswith("interp:"):
        try:
            beta = float(text.split(":", 1)[1])
        except ValueError:
            raise ConfigurationError(f"bad interp beta in {text!r}") from None
        return Strategy("interp", beta)
    return Strategy(text)


@dataclass
class CollectedStep:
    """Loss inputs at one visited beam."""

    candidates: np.ndarray
    costs: np.ndarray
    scores: np.ndarray
    k: int
    features: object = None

    def scoring(self, scores: np.ndarray | None = None) -> NeighborScoring:
        return NeighborScoring(
            self.scores if scores is None else scores, self.costs, self.k, self.candidates
        )


@dataclass
class Trajectory:
    beams: list[Beam]
    steps: list[CollectedStep]
    stopped_early: bool = False
    cost_increase_count: int = 0
    pure_rollin: bool = False
    oracle_steps: int = 0
    transition_costs: list[float] = field(default_factory=list)
    final_cost: float = float("nan")

    @property
    def loss_inputs(self) -> list[NeighborScoring]:
        return [s.scoring() for s in self.steps]


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a tuple such as
    ``(run_seed, example_index)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def oracle_step(space, table, b: Beam, k: int) -> Beam:
    return policy_step(space, b, k, oracle_scores(table))


def detect_cost_increase(table, b: Beam, b2: Beam) -> bool:
    return beam_cost(table, b2) - beam_cost(table, b) > 0


def beam_trajectory(space, table, scorer, k: int, strategy, seed=None, keep_features: bool = False) -> Trajectory:
    """Roll in with ``scorer`` under ``strategy`` and record loss inputs.

    ``scorer`` maps an array of node ids to scores.  With
    ``keep_features`` it must also provide ``feature_matrix`` and the
    feature block of every step is stored for later replay.
    """
    strategy = parse_strategy(strategy)
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    rng = make_rng(seed if seed is not None else 0) if strategy.kind == "interp" else None
    depth = space.depth
    b = initial_beam(space)
    traj = Trajectory([b], [])
    traj.pure_rollin = strategy.kind != "oracle"
    current = beam_cost(table, b)
    step = 0
    while True:
        # successors are either a terminal singleton or all non-terminal
        if space.is_terminal(b.members[0]):
            break
        step += 1
        cands = expand(space, b)
        costs = table.lookup(cands)
        if keep_features:
            feats = scorer.feature_matrix(cands)
            scores = feats @ scorer.params
        else:
            feats = None
            scores = np.asarray(scorer(cands), dtype=float)
        cost_of = dict(zip(cands.tolist(), costs.tolist()))
        k_loss = 1 if bool(np.all(space.terminal_mask(cands))) else k
        traj.steps.append(CollectedStep(cands, costs, scores, k_loss, feats))
        before_last = depth is None or step < depth

        use_oracle = strategy.kind == "oracle" or (strategy.kind == "interp" and rng.random() < strategy.beta)
        if use_oracle:
            nb = select_successor(space, cands, rank(cands, -costs), k)
            traj.oracle_steps += 1
            if strategy.kind == "interp" and before_last:
                traj.pure_rollin = False
        else:
            nb = select_successor(space, cands, rank(cands, scores), k)
            nb_cost = min(cost_of[v] for v in nb.members)
            if nb_cost > current:
                traj.cost_increase_count += 1
                if strategy.kind != "interp" and before_last:
                    traj.pure_rollin = False
                if strategy.kind == "stop":
                    traj.beams.append(nb)
                    traj.transition_costs.append(nb_cost - current)
                    traj.stopped_early = True
                    current = nb_cost
                    break
                if strategy.kind == "reset":
                    nb = select_successor(space, cands, rank(cands, -costs), 1)
                    traj.oracle_steps += 1
        nb_cost = min(cost_of[v] for v in nb.members)
        traj.transition_costs.append(nb_cost - current)
        traj.beams.append(nb)
        current = nb_cost
        b = nb
    traj.final_cost = current
    return traj
