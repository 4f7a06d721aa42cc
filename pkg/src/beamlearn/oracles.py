"""Independent reference computations used to certify the main modules.

Nothing here calls into ``beam_search``, ``losses`` or the completion cost
table builder: each oracle works from the raw space interface
(``initial``, ``neighbors``, ``is_terminal``, ``terminal_cost``) or from
plain lists, with straightforward sorting instead of vectorized ranking.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .search_space import TreeSpace

__all__ = [
    "MAX_TERMINALS",
    "brute_force_best_terminal",
    "brute_force_completion_costs",
    "brute_force_policy_cost",
    "realized_transition_cost",
    "expectation_shift_check",
    "WitnessReport",
    "nonconvexity_witnesses",
    "random_tree_space",
    "reference_perceptron_hinge",
    "reference_log_likelihood_step",
]

MAX_TERMINALS = 10**5


def _terminals_below(space, v: int, limit: int = MAX_TERMINALS) -> list[int]:
    out, stack = [], [v]
    while stack:
        u = stack.pop()
        if space.is_terminal(u):
            out.append(u)
            if len(out) > limit:
                raise PreconditionError(f"more than {limit} terminals; refusing exhaustive scan")
        else:
            stack.extend(space.neighbors(u))
    return out


def brute_force_best_terminal(space) -> tuple[int, float]:
    """Lowest-cost terminal reachable from the root, lowest id on ties."""
    terms = _terminals_below(space, space.initial)
    cost, node = min((space.terminal_cost(t), t) for t in terms)
    return node, cost


def brute_force_completion_costs(space, nodes) -> list[float]:
    return [min(space.terminal_cost(t) for t in _terminals_below(space, int(v))) for v in nodes]


def brute_force_policy_cost(space, k: int, scorer, max_steps: int = 10_000) -> float:
    """Simulate the beam trajectory with an explicit sort at every step and
    return the cost of the terminal it ends at."""
    if k < 1:
        raise PreconditionError("k must be >= 1")

    def score(v):
        return float(np.asarray(scorer(np.array([v], dtype=np.int64)))[0])

    beam = [space.initial]
    for _ in range(max_steps):
        top = sorted(beam, key=lambda v: (-score(v), v))[0]
        if space.is_terminal(top):
            return float(space.terminal_cost(top))
        cands = sorted({c for v in beam for c in space.neighbors(v)})
        ranked = sorted(cands, key=lambda v: (-score(v), v))
        if space.is_terminal(ranked[0]):
            beam = [ranked[0]]
        else:
            beam = [v for v in ranked if not space.is_terminal(v)][:k]
    raise PreconditionError("trajectory did not terminate")


def realized_transition_cost(scores, costs, k: int) -> float:
    """Cost increase when the ``k`` best-scoring candidates are kept."""
    n = len(scores)
    kept = sorted(range(n), key=lambda i: (-scores[i], i))[:k]
    return min(costs[i] for i in kept) - min(costs)


def expectation_shift_check(d, d2, f, a: float, r: float) -> bool:
    """Whether ``|E_d f - E_d2 f| <= (r / 2) * ||d - d2||_1`` for ``f``
    with values in ``[a, a + r]``."""
    d, d2, f = (np.asarray(x, dtype=float) for x in (d, d2, f))
    if not (d.shape == d2.shape == f.shape and d.ndim == 1):
        raise PreconditionError("d, d2 and f must be vectors over the same support")
    for p in (d, d2):
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise PreconditionError("d and d2 must be probability vectors")
    if r < 0 or np.any(f < a - 1e-12) or np.any(f > a + r + 1e-12):
        raise PreconditionError("f must take values in [a, a + r]")
    lhs = abs(float(d @ f) - float(d2 @ f))
    return lhs <= 0.5 * r * float(np.abs(d - d2).sum()) + 1e-12


@dataclass(frozen=True)
class WitnessReport:
    cond_loss: tuple[float, float, float]
    cond_increase: tuple[bool, bool, bool]
    hinge: tuple[float, float, float]

    @property
    def ok(self) -> bool:
        return (
            self.cond_loss[0] == 0 and self.cond_loss[1] == 0 and self.cond_loss[2] > 0
            and self.hinge[0] == 0 and self.hinge[1] == 0 and self.hinge[2] > 0
        )


def _by_score(s):
    return sorted(range(len(s)), key=lambda i: (-s[i], i))


def _by_cost(c):
    return sorted(range(len(c)), key=lambda i: (c[i], i))


def _conditional_loss(s, c, k):
    """Cost-weighted last-in-beam hinge, charged only on a cost increase."""
    last, best = _by_score(s)[k - 1], _by_cost(c)[0]
    increase = realized_transition_cost(s, c, k) > 0
    value = (c[last] - c[best]) * max(0.0, s[last] - s[best] + 1.0)
    return (value if increase else 0.0), increase


def _kth_hinge(s, c, k):
    """Hinge between the k-th by score and the k-th by cost; an element is
    not compared with itself."""
    i, j = _by_score(s)[k - 1], _by_cost(c)[k - 1]
    if i == j:
        return 0.0
    return max(0.0, s[i] - s[j] + 1.0)


def nonconvexity_witnesses() -> WitnessReport:
    """Evaluate both endpoint pairs and their midpoints."""
    k = 2
    c = [0.0, 1.0, 1.0]
    s, s2 = [1.0, 10.0, 0.0], [1.0, 0.0, 10.0]
    mid = [(x + y) / 2 for x, y in zip(s, s2)]
    cond = [_conditional_loss(x, c, k) for x in (s, s2, mid)]
    c_unique = [0.0, 1.0, 2.0]
    h, h2 = [2.0, 1.0, 0.0], [2.0, 4.0, 0.0]
    hmid = [(x + y) / 2 for x, y in zip(h, h2)]
    hinge = [_kth_hinge(x, c_unique, k) for x in (h, h2, hmid)]
    return WitnessReport(
        tuple(v for v, _ in cond), tuple(inc for _, inc in cond), tuple(hinge)
    )


def random_tree_space(seed, max_depth: int = 4, max_branch: int = 3, max_cost: int = 5,
                      depth: int | None = None) -> TreeSpace:
    """Random tree with uniform terminal depth and small integer costs."""
    rng = random.Random(seed)
    depth = rng.randint(1, max_depth) if depth is None else depth
    children: dict[int, list[int]] = {}
    costs: dict[int, float] = {}
    frontier, nxt = [0], 1
    for _ in range(depth):
        new = []
        for v in frontier:
            kids = list(range(nxt, nxt + rng.randint(1, max_branch)))
            nxt += len(kids)
            children[v] = kids
            new.extend(kids)
        frontier = new
    for v in frontier:
        children[v] = []
        costs[v] = float(rng.randint(0, max_cost))
    return TreeSpace([children[v] for v in range(nxt)], costs)


def reference_perceptron_hinge(scores, gold: int, k: int) -> tuple[float, list[float]]:
    """``max(0, s[k-th by score] - s[gold])`` and its subgradient."""
    kth = _by_score(scores)[min(k, len(scores)) - 1]
    grad = [0.0] * len(scores)
    value = scores[kth] - scores[gold]
    if value > 0:
        grad[kth] += 1.0
        grad[gold] -= 1.0
        return value, grad
    return 0.0, grad


def reference_log_likelihood_step(theta, steps, step: float):
    """One gradient step of the summed locally normalized log-likelihood.

    ``steps`` is a list of ``(rows, gold)`` pairs with dense candidate
    features.  Dot products and the chain rule are accumulated one term at a
    time in index order.
    """
    theta = np.asarray(theta, dtype=float)
    total = np.zeros_like(theta)
    nll = 0.0
    for rows, gold in steps:
        phi = np.asarray(rows, dtype=float)
        s = np.zeros(len(phi))
        for i, row in enumerate(phi):
            acc = 0.0
            for f, t in zip(row, theta):
                acc += f * t
            s[i] = acc
        m = s.max()
        e = np.exp(s - m)
        p = e / e.sum()
        nll += float(m + np.log(e.sum())) - s[gold]
        d = p.copy()
        d[gold] -= 1.0
        grad = np.zeros_like(theta)
        for i, row in enumerate(phi):
            grad += row * d[i]
        total += grad
    return theta - step * total, nll
