"""Regret and concentration diagnostics for online runs.

The comparator of the empirical regret is the best fixed parameter vector
on the loss inputs stored during training, so the roll-in distribution of
every round stays frozen at the iterate that produced it.  For the
piecewise-linear convex losses it is an exact LP; for the smooth convex log
loss it is L-BFGS; other losses fall back to a multi-start local search and
the result is flagged as not certified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog, minimize

from .data_collection import CollectedStep
from .errors import ConfigurationError, PreconditionError
from .losses import CONVEX_LOSSES, SCORE_CLIP, get_loss, sort_perms

__all__ = [
    "RegretTracker",
    "RegretReport",
    "empirical_regret",
    "stored_loss",
    "alpha_hat",
    "azuma_eta",
    "stopreset_bound",
    "loss_bound_u",
]


@dataclass
class RegretTracker:
    """Per-round record of an online run.

    ``pure_rollin`` holds ``None`` for rounds collected with the oracle
    strategy; those rounds are left out of ``alpha_hat``.
    """

    u: float = math.inf
    losses: list[float] = field(default_factory=list)
    terminal_costs: list[float] = field(default_factory=list)
    pure_rollin: list[bool | None] = field(default_factory=list)
    cost_increases: list[int] = field(default_factory=list)
    steps: list[list[CollectedStep]] = field(default_factory=list)
    expected_losses: list[float] = field(default_factory=list)
    max_abs_score: float = 0.0

    def record(self, loss: float, terminal_cost: float, pure_rollin, cost_increases: int, steps=None):
        self.losses.append(float(loss))
        self.terminal_costs.append(float(terminal_cost))
        self.pure_rollin.append(pure_rollin)
        self.cost_increases.append(int(cost_increases))
        self.steps.append(list(steps or []))
        for st in steps or []:
            if st.scores.size:
                self.max_abs_score = max(self.max_abs_score, float(np.abs(st.scores).max()))

    def record_expected(self, value: float):
        """Estimate of the expected loss of the iterate of the next unmatched round."""
        self.expected_losses.append(float(value))

    @property
    def rounds(self) -> int:
        return len(self.losses)

    @property
    def z(self) -> np.ndarray:
        """Martingale path ``sum_i (expected_i - sampled_i)`` over rounds
        that have an expected-loss estimate."""
        n = len(self.expected_losses)
        return np.cumsum(np.asarray(self.expected_losses) - np.asarray(self.losses[:n]))


@dataclass
class RegretReport:
    gamma_hat: float
    epsilon_hat: float
    online_mean: float
    certified: bool
    theta_star: np.ndarray | None = None


def _flat(steps_per_round: list[list[CollectedStep]]) -> list[CollectedStep]:
    return [st for rnd in steps_per_round for st in rnd]


def stored_loss(theta, steps_per_round, loss_name: str, with_grad: bool = False):
    """Mean over rounds of the summed per-step loss at fixed ``theta``."""
    loss_fn = get_loss(loss_name)
    theta = np.asarray(theta, dtype=float)
    m = len(steps_per_round)
    total = 0.0
    grad = np.zeros_like(theta) if with_grad else None
    for st in _flat(steps_per_round):
        if st.features is None:
            raise PreconditionError("stored steps need feature blocks for replay")
        res = loss_fn(st.scoring(st.features @ theta))
        total += res.value
        if with_grad:
            grad += st.features.T @ res.grad_scores
    if with_grad:
        return total / m, grad / m
    return total / m


def _lp_comparator(steps, loss_name: str, m: int, dim: int):
    """Exact minimum of the mean stored loss for piecewise-linear convex losses."""
    blocks, rhs, owner = [], [], []
    for idx, st in enumerate(steps):
        p = sort_perms(st.scoring())
        top = p.sigma_star[0]
        F = sp.csr_matrix(st.features)
        if loss_name == "perceptron_first":
            rows = np.array([i for i in range(F.shape[0]) if i != top], dtype=np.int64)
            w = np.ones(rows.size)
            b = np.zeros(rows.size)
        else:
            rest = p.sigma_star[st.k:] if st.k < F.shape[0] else np.zeros(0, dtype=np.int64)
            w = st.costs[rest] - st.costs[top]
            keep = w > 0
            rows, w = rest[keep], w[keep]
            b = -w
        if rows.size == 0:
            continue
        diff = sp.diags(w) @ (F[rows] - F[np.full(rows.size, top)])
        blocks.append(diff)
        rhs.append(b)
        owner.append(np.full(rows.size, idx))
    n_slack = len(steps)
    if not blocks:
        return 0.0, np.zeros(dim)
    D = sp.vstack(blocks).tocsr()
    used = np.unique(D.indices)  # column indices of the nonzeros
    D = D[:, used]
    owner = np.concatenate(owner)
    slack = sp.csr_matrix((-np.ones(owner.size), (np.arange(owner.size), owner)), shape=(owner.size, n_slack))
    A = sp.hstack([D, slack]).tocsr()
    cost = np.concatenate([np.zeros(used.size), np.full(n_slack, 1.0 / m)])
    bounds = [(None, None)] * used.size + [(0, None)] * n_slack
    res = linprog(cost, A_ub=A, b_ub=np.concatenate(rhs), bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"comparator LP failed: {res.message}")
    theta = np.zeros(dim)
    theta[used] = res.x[: used.size]
    return float(res.fun), theta


def _local_comparator(steps_per_round, loss_name, dim, starts):
    best_val, best_theta = math.inf, None
    for x0 in starts:
        res = minimize(
            stored_loss, x0, args=(steps_per_round, loss_name, True), jac=True, method="L-BFGS-B",
            options={"maxiter": 500, "gtol": 1e-10, "ftol": 1e-14},
        )
        val = stored_loss(res.x, steps_per_round, loss_name)
        if val < best_val:
            best_val, best_theta = val, res.x
    return best_val, best_theta


def empirical_regret(tracker: RegretTracker, loss_name: str, dim: int, upto: int | None = None,
                     extra_candidates=(), restarts: int = 3, seed: int = 0) -> RegretReport:
    """Average online loss minus the best fixed-parameter average on the
    stored inputs of the first ``upto`` rounds."""
    m = tracker.rounds if upto is None else upto
    if not 1 <= m <= tracker.rounds:
        raise PreconditionError(f"need 1 <= upto <= {tracker.rounds}, got {m}")
    rounds = tracker.steps[:m]
    online = float(np.mean(tracker.losses[:m]))
    steps = _flat(rounds)
    candidates = [np.zeros(dim), *[np.asarray(c, dtype=float) for c in extra_candidates]]
    if not steps:
        return RegretReport(online, 0.0, online, True, np.zeros(dim))
    certified = loss_name in CONVEX_LOSSES
    if loss_name in ("perceptron_first", "upper_bound"):
        _, theta = _lp_comparator(steps, loss_name, m, dim)
        candidates.append(theta)
    elif loss_name == "log_neighbors":
        _, theta = _local_comparator(rounds, loss_name, dim, [np.zeros(dim)])
        candidates.append(theta)
    else:
        rng = np.random.default_rng(seed)
        starts = candidates + [rng.normal(size=dim) for _ in range(restarts)]
        _, theta = _local_comparator(rounds, loss_name, dim, starts)
        candidates.append(theta)
    values = [stored_loss(c, rounds, loss_name) for c in candidates]
    j = int(np.argmin(values))
    return RegretReport(online - values[j], values[j], online, certified, candidates[j])


def alpha_hat(tracker: RegretTracker, upto: int | None = None) -> float:
    """Fraction of non-oracle rounds whose roll-in was purely learned."""
    flags = [f for f in tracker.pure_rollin[:upto] if f is not None]
    if not flags:
        return math.nan
    return float(np.mean(flags))


def azuma_eta(u: float, delta: float, m: int) -> float:
    if not 0 < delta <= 1:
        raise ConfigurationError(f"delta must lie in (0, 1], got {delta}")
    if m < 1:
        raise PreconditionError(f"m must be >= 1, got {m}")
    if u < 0:
        raise PreconditionError(f"u must be >= 0, got {u}")
    return u * math.sqrt(2.0 * math.log(1.0 / delta) / m)


def stopreset_bound(tracker: RegretTracker, delta: float, u: float | None = None) -> float:
    u = tracker.u if u is None else u
    m = tracker.rounds
    a = alpha_hat(tracker)
    return float(np.mean(tracker.losses)) + u * (1.0 - a) + 2.0 * azuma_eta(u, delta, m)


def _space_stats(space):
    """(depth, max branching, cost range, max cost) of a search space."""
    if hasattr(space, "num_labels") and hasattr(space, "length"):
        return space.length, space.num_labels, float(space.length), float(space.length)
    n = space.n_nodes
    branch = max(len(space.neighbors(v)) for v in range(n))
    costs = np.array([space.terminal_cost(int(v)) for v in space.terminals()])
    depth = space.depth if space.depth is not None else max(space.node_depth(int(v)) for v in space.terminals())
    return depth, branch, float(costs.max() - costs.min()), float(costs.max())


def loss_bound_u(space, loss_name: str, k: int, score_clip: float = SCORE_CLIP) -> float:
    """Bound on the summed loss of one trajectory when every score lies in
    ``[-score_clip, score_clip]``."""
    get_loss(loss_name)
    depth, branch, r, cmax = _space_stats(space)
    n = k * branch
    gap = 2.0 * score_clip
    pairs = n * (n - 1) / 2
    per_step = {
        "perceptron_first": gap,
        "perceptron_last": gap,
        "margin_last": gap + 1.0,
        "cs_margin_last": r * (gap + 1.0),
        "upper_bound": r * (gap + 1.0),
        "log_beam": gap + math.log(k + 1),
        "log_neighbors": gap + math.log(n),
        "cs_margin_beam": cmax + gap,
        "softmax_margin_beam": cmax + gap + math.log(k),
        "wp_all": pairs * r * (gap + 1.0),
        "wp_bipartite": pairs * r * (gap + 1.0),
        "wp_hybrid": pairs * r * (gap + 1.0),
    }[loss_name]
    return per_step * depth
