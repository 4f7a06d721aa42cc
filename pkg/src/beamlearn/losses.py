"""Surrogate losses over the neighborhood of a beam.

Every loss is a pure function of a :class:`NeighborScoring` (scores ``s``
and completion costs ``c`` of the ``n`` candidates, plus the beam width
``k``) and returns a :class:`LossResult` holding the value and a
subgradient with respect to ``s``.

Permutations are 0-based here: ``sigma_star[0]`` is the lowest-cost
candidate and ``sigma_hat[0]`` the highest-scoring one.  Both break ties by
candidate order, which callers arrange to be ascending node id.  Wherever a
formula indexes the ``k``-th ranked element, ``k' = min(k, n)`` is used.
Hinges that are exactly zero get the zero subgradient.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, PreconditionError

SCORE_CLIP = 1e6

__all__ = [
    "NeighborScoring",
    "Permutations",
    "LossResult",
    "sort_perms",
    "perceptron_first",
    "perceptron_last",
    "margin_last",
    "cost_sensitive_margin_last",
    "upper_bound",
    "log_loss_beam",
    "log_loss_neighbors",
    "cost_sensitive_margin_beam",
    "softmax_margin_beam",
    "weighted_pairs",
    "LOSSES",
    "CONVEX_LOSSES",
    "get_loss",
    "loss_gradient_wrt_params",
]


@dataclass(frozen=True)
class NeighborScoring:
    """Scores and costs of the candidates ``A_b`` of one beam."""

    scores: np.ndarray
    costs: np.ndarray
    k: int
    order: np.ndarray | None = None

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.scores, dtype=float))
        c = np.atleast_1d(np.asarray(self.costs, dtype=float))
        if s.ndim != 1 or s.shape != c.shape or s.size == 0:
            raise PreconditionError("scores and costs must be equal-length nonempty vectors")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(c))):
            raise PreconditionError("scores and costs must be finite")
        if self.k < 1:
            raise PreconditionError(f"k must be >= 1, got {self.k}")
        if np.abs(s).max() > SCORE_CLIP:
            warnings.warn(f"scores clipped to magnitude {SCORE_CLIP:g}", RuntimeWarning, stacklevel=3)
            s = np.clip(s, -SCORE_CLIP, SCORE_CLIP)
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "costs", c)
        if self.order is not None:
            order = np.asarray(self.order)
            if order.shape != s.shape:
                raise PreconditionError("order must have one entry per candidate")
            object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return self.scores.size

    @property
    def k_eff(self) -> int:
        return min(self.k, self.n)

    def with_scores(self, scores) -> "NeighborScoring":
        return NeighborScoring(scores, self.costs, self.k, self.order)


@dataclass(frozen=True)
class Permutations:
    sigma_star: np.ndarray
    sigma_hat: np.ndarray


@dataclass(frozen=True)
class LossResult:
    value: float
    grad_scores: np.ndarray


def sort_perms(ns: NeighborScoring) -> Permutations:
    tie = ns.order if ns.order is not None else np.arange(ns.n)
    return Permutations(
        sigma_star=np.lexsort((tie, ns.costs)),
        sigma_hat=np.lexsort((tie, -ns.scores)),
    )


def _logsumexp(x: np.ndarray) -> tuple[float, np.ndarray]:
    """Stable log-sum-exp and the matching softmax weights."""
    m = x.max()
    e = np.exp(x - m)
    z = e.sum()
    return float(m + np.log(z)), e / z


def _hinge_pair(ns, hi: int, lo: int, margin: float, weight: float = 1.0) -> LossResult:
    """``weight * max(0, margin + s[hi] - s[lo])``."""
    s = ns.scores
    arg = margin + s[hi] - s[lo]
    grad = np.zeros(ns.n)
    if arg > 0 and weight != 0:
        grad[hi] += weight
        grad[lo] -= weight
        return LossResult(float(weight * arg), grad)
    return LossResult(0.0, grad)


def perceptron_first(ns: NeighborScoring) -> LossResult:
    p = sort_perms(ns)
    return _hinge_pair(ns, p.sigma_hat[0], p.sigma_star[0], 0.0)


def perceptron_last(ns: NeighborScoring) -> LossResult:
    p = sort_perms(ns)
    return _hinge_pair(ns, p.sigma_hat[ns.k_eff - 1], p.sigma_star[0], 0.0)


def margin_last(ns: NeighborScoring) -> LossResult:
    p = sort_perms(ns)
    return _hinge_pair(ns, p.sigma_hat[ns.k_eff - 1], p.sigma_star[0], 1.0)


def cost_sensitive_margin_last(ns: NeighborScoring) -> LossResult:
    p = sort_perms(ns)
    last, top = p.sigma_hat[ns.k_eff - 1], p.sigma_star[0]
    weight = max(0.0, float(ns.costs[last] - ns.costs[top]))
    return _hinge_pair(ns, last, top, 1.0, weight)


def upper_bound(ns: NeighborScoring) -> LossResult:
    """``max(0, delta_{k+1}, ..., delta_n)`` with cost-weighted margins
    between the best candidate and every candidate that should be cut."""
    p = sort_perms(ns)
    grad = np.zeros(ns.n)
    if ns.k >= ns.n:
        return LossResult(0.0, grad)
    top = p.sigma_star[0]
    rest = p.sigma_star[ns.k:]
    w = ns.costs[rest] - ns.costs[top]
    deltas = w * (ns.scores[rest] - ns.scores[top] + 1.0)
    j = int(np.argmax(deltas))
    if deltas[j] <= 0:
        return LossResult(0.0, grad)
    grad[rest[j]] += w[j]
    grad[top] -= w[j]
    return LossResult(float(deltas[j]), grad)


def log_loss_beam(ns: NeighborScoring) -> LossResult:
    """Log loss normalized over the beam plus the best candidate."""
    p = sort_perms(ns)
    top = p.sigma_star[0]
    idx = np.unique(np.concatenate(([top], p.sigma_hat[: ns.k_eff])))
    lse, w = _logsumexp(ns.scores[idx])
    grad = np.zeros(ns.n)
    grad[idx] = w
    grad[top] -= 1.0
    return LossResult(max(0.0, lse - float(ns.scores[top])), grad)


def log_loss_neighbors(ns: NeighborScoring) -> LossResult:
    """Log loss normalized over every candidate."""
    top = sort_perms(ns).sigma_star[0]
    lse, w = _logsumexp(ns.scores)
    grad = w.copy()
    grad[top] -= 1.0
    return LossResult(max(0.0, lse - float(ns.scores[top])), grad)


def cost_sensitive_margin_beam(ns: NeighborScoring) -> LossResult:
    """``-s[best] + max_{i <= k'} (c + s)[sigma_hat(i)]``.  Not clamped at 0."""
    p = sort_perms(ns)
    top = p.sigma_star[0]
    beam = p.sigma_hat[: ns.k_eff]
    aug = ns.costs[beam] + ns.scores[beam]
    i = int(np.argmax(aug))
    grad = np.zeros(ns.n)
    grad[beam[i]] += 1.0
    grad[top] -= 1.0
    return LossResult(float(aug[i] - ns.scores[top]), grad)


def softmax_margin_beam(ns: NeighborScoring) -> LossResult:
    p = sort_perms(ns)
    top = p.sigma_star[0]
    beam = p.sigma_hat[: ns.k_eff]
    lse, w = _logsumexp(ns.costs[beam] + ns.scores[beam])
    grad = np.zeros(ns.n)
    grad[beam] += w
    grad[top] -= 1.0
    return LossResult(lse - float(ns.scores[top]), grad)


_PAIR_MODES = ("all", "bipartite", "hybrid")


def weighted_pairs(ns: NeighborScoring, mode: str = "all") -> LossResult:
    """Sum of cost-weighted pairwise hinges in cost order.

    ``all`` uses every pair ``i < j``; ``bipartite`` pairs candidates that
    belong in the beam (``i <= k'``) with those that do not (``j > k'``);
    ``hybrid`` pairs each in-beam candidate with every later one.
    """
    if mode not in _PAIR_MODES:
        raise ConfigurationError(f"unknown weighted pairs mode {mode!r}; expected one of {_PAIR_MODES}")
    p = sort_perms(ns)
    n, kk = ns.n, ns.k_eff
    ii, jj = np.triu_indices(n, k=1)
    if mode == "bipartite":
        keep = (ii < kk) & (jj >= kk)
    elif mode == "hybrid":
        keep = ii < kk
    else:
        keep = np.ones(ii.shape, dtype=bool)
    a, b = p.sigma_star[ii[keep]], p.sigma_star[jj[keep]]
    w = ns.costs[b] - ns.costs[a]
    arg = ns.scores[b] - ns.scores[a] + 1.0
    active = (arg > 0) & (w != 0)
    grad = np.zeros(n)
    np.add.at(grad, b[active], w[active])
    np.add.at(grad, a[active], -w[active])
    value = float(np.sum(w[active] * arg[active]))
    return LossResult(value, grad)


LossFn = Callable[[NeighborScoring], LossResult]

LOSSES: dict[str, LossFn] = {
    "perceptron_first": perceptron_first,
    "perceptron_last": perceptron_last,
    "margin_last": margin_last,
    "cs_margin_last": cost_sensitive_margin_last,
    "upper_bound": upper_bound,
    "log_beam": log_loss_beam,
    "log_neighbors": log_loss_neighbors,
    "cs_margin_beam": cost_sensitive_margin_beam,
    "softmax_margin_beam": softmax_margin_beam,
    "wp_all": lambda ns: weighted_pairs(ns, "all"),
    "wp_bipartite": lambda ns: weighted_pairs(ns, "bipartite"),
    "wp_hybrid": lambda ns: weighted_pairs(ns, "hybrid"),
}

CONVEX_LOSSES = frozenset({"perceptron_first", "upper_bound", "log_neighbors"})


def get_loss(name: str) -> LossFn:
    try:
        return LOSSES[name]
    except KeyError:
        raise ConfigurationError(f"unknown loss {name!r}; choose from {sorted(LOSSES)}") from None


def loss_gradient_wrt_params(result: LossResult, candidates, scorer) -> np.ndarray:
    """Chain rule through a linear scorer: ``sum_i g_i * phi(v_i)``.

    ``scorer`` is a :class:`~beamlearn.scoring.LinearScorer` or a sparse
    feature matrix whose rows align with ``candidates``.
    """
    g = np.asarray(result.grad_scores, dtype=float)
    if sp.issparse(scorer):
        phi = scorer
    else:
        phi = scorer.feature_matrix(candidates)
    if phi.shape[0] != g.shape[0]:
        raise PreconditionError(
            f"{g.shape[0]} score gradients for {phi.shape[0]} candidates"
        )
    return phi.T @ g
