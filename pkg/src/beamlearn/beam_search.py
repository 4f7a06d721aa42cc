"""Beam search space: beams, expansion, the beam policy, and beam costs.

Score functions are callables mapping an array of node ids to an array of
scores.  A learned scorer passes ``scorer.scores``; the oracle passes
:func:`oracle_scores` which scores by negated completion cost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from .errors import PreconditionError, StructuralError

ScoreFn = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "Beam",
    "ScoredCandidate",
    "BeamTransition",
    "rank",
    "best",
    "expand",
    "policy_step",
    "beam_search",
    "beam_cost",
    "transition_cost",
    "initial_beam",
    "oracle_scores",
    "select_successor",
]


@dataclass(frozen=True)
class Beam:
    """Ordered set of at most ``k`` distinct search nodes."""

    members: tuple[int, ...]

    def __post_init__(self):
        if not self.members:
            raise StructuralError("a beam must contain at least one node")
        if len(set(self.members)) != len(self.members):
            raise StructuralError(f"beam has repeated members: {self.members}")

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __contains__(self, v) -> bool:
        return v in self.members


class ScoredCandidate(NamedTuple):
    node: int
    score: float


@dataclass(frozen=True)
class BeamTransition:
    """One edge of the beam search space together with its cost change."""

    source: Beam
    target: Beam
    cost_delta: float

    @property
    def cost_increase(self) -> bool:
        return self.cost_delta > 0


def initial_beam(space) -> Beam:
    return Beam((int(space.initial),))


def rank(nodes: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Positions of ``nodes`` sorted by descending score, ties by ascending id."""
    scores = np.asarray(scores, dtype=float)
    if not np.all(np.isfinite(scores)):
        raise PreconditionError("scores must be finite")
    return np.lexsort((np.asarray(nodes), -scores))


def best(candidates: Sequence[ScoredCandidate | tuple[int, float]], k: int) -> list[int]:
    """Top ``min(k, n)`` nodes by score; equal scores resolve to the lower id."""
    if not candidates:
        raise PreconditionError("best() needs at least one candidate")
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    nodes = np.array([c[0] for c in candidates], dtype=np.int64)
    scores = np.array([c[1] for c in candidates], dtype=float)
    order = rank(nodes, scores)
    return nodes[order[:k]].tolist()


def expand(space, b: Beam) -> np.ndarray:
    """Union of the members' neighborhoods, deduplicated, ascending ids."""
    out: set[int] = set()
    for v in b:
        ch = space.neighbors(v)
        if not ch:
            raise PreconditionError(f"cannot expand beam with terminal member {v}")
        out.update(ch)
    return np.array(sorted(out), dtype=np.int64)


def oracle_scores(table) -> ScoreFn:
    """Score function ``-c*`` that induces the oracle policy."""
    return lambda nodes: -table.lookup(nodes)


def select_successor(space, cands: np.ndarray, order: np.ndarray, k: int) -> Beam:
    top = cands[order[0]]
    if space.is_terminal(int(top)):
        return Beam((int(top),))
    ranked = cands[order]
    keep = ranked[~space.terminal_mask(ranked)][:k]
    if len(keep) == 0:
        raise StructuralError("top candidate is non-terminal but no non-terminal candidates remain")
    return Beam(tuple(int(v) for v in keep))


def policy_step(space, b: Beam, k: int, score_fn: ScoreFn) -> Beam:
    """Successor beam: the terminal singleton if the best candidate is
    terminal, otherwise the ``k`` best non-terminal candidates."""
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    cands = expand(space, b)
    order = rank(cands, score_fn(cands))
    return select_successor(space, cands, order, k)


def beam_search(space, k: int, score_fn: ScoreFn, return_beams: bool = False):
    """Decode with beam width ``k``; return the terminal node reached.

    Scores of the current beam are re-evaluated at every iteration to
    decide whether its best member is terminal.  With ``return_beams`` the
    list of visited beams is returned as well.
    """
    if k < 1:
        raise PreconditionError(f"k must be >= 1, got {k}")
    b = initial_beam(space)
    beams = [b]
    while True:
        members = np.asarray(b.members, dtype=np.int64)
        top = int(members[rank(members, score_fn(members))[0]])
        if space.is_terminal(top):
            break
        b = policy_step(space, b, k, score_fn)
        beams.append(b)
    if return_beams:
        return top, beams
    return top


def beam_cost(table, b: Beam) -> float:
    """Completion cost of a beam: the minimum over its members."""
    return float(np.min(table.lookup(np.asarray(b.members, dtype=np.int64))))


def transition_cost(table, b: Beam, b2: Beam) -> float:
    return beam_cost(table, b2) - beam_cost(table, b)
