"""Online learning over beam trajectories.

Every training example is one round: build its search space, roll in with
the current parameters, sum the surrogate losses along the trajectory and
take one optimizer step.  Validation decodes with plain beam search and
keeps the parameters with the lowest mean terminal cost.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .beam_search import beam_search
from .config import RunConfig
from .data_collection import beam_trajectory, make_rng, parse_strategy
from .diagnostics import RegretTracker, alpha_hat, azuma_eta, empirical_regret, loss_bound_u
from .errors import PreconditionError
from .losses import get_loss
from .optim import make_optimizer
from .scoring import LinearScorer, save_params
from .tasks import (
    Example,
    FeatureTables,
    SequenceTask,
    garden_path_dataset,
    generate_dataset,
    hamming_space,
    read_jsonl,
)

__all__ = [
    "LearnerState",
    "LearnResult",
    "METRIC_COLUMNS",
    "Problem",
    "build_problem",
    "learn",
    "round_loss",
    "decode_cost",
    "evaluate",
    "make_datasets",
    "mixture_cost",
    "expected_round_losses",
    "write_metrics",
]

METRIC_COLUMNS = (
    "round",
    "surrogate_loss",
    "terminal_cost",
    "cost_increases",
    "pure_rollin",
    "gamma_hat",
    "alpha_hat",
    "eta",
    "wallclock_ms",
)

INIT_STREAM = 2**31 - 1  # generator stream for the initial parameters

FeatureFactory = Callable[[Example, object], Callable]


@dataclass
class LearnerState:
    theta: np.ndarray
    optimizer: object
    round: int = 0
    best_theta: np.ndarray | None = None
    best_cost: float = math.inf
    best_round: int = 0


@dataclass
class LearnResult:
    state: LearnerState
    tracker: RegretTracker
    history: list[dict]
    validation: list[tuple[int, float]] = field(default_factory=list)
    thetas: list[np.ndarray] = field(default_factory=list)


@dataclass(frozen=True)
class Problem:
    """Builds the per-example search space, cost table and features."""

    num_labels: int
    feature_factory: FeatureFactory
    dim: int

    def instance(self, ex: Example, theta: np.ndarray):
        space, table = hamming_space(ex, self.num_labels)
        return space, table, LinearScorer(theta, self.feature_factory(ex, space))


def build_problem(cfg: RunConfig) -> Problem:
    vocab = 3 if cfg.task == "garden_path" else cfg.vocab_size
    labels = 4 if cfg.task == "garden_path" else cfg.num_labels
    tables = FeatureTables.build(labels, vocab, cfg.feature_dim, cfg.feature_seed)
    return Problem(labels, tables.feature_map, cfg.feature_dim)


def make_datasets(cfg: RunConfig) -> tuple[list[Example], list[Example]]:
    """Training and validation examples; validation is the tail split."""
    if cfg.data_path:
        data = read_jsonl(cfg.data_path)
    elif cfg.task == "garden_path":
        data = garden_path_dataset(cfg.m, cfg.seed, max(cfg.length, 2))
    else:
        task = SequenceTask.simple(cfg.num_labels, cfg.length, cfg.vocab_size, cfg.noise, cfg.stickiness)
        data = generate_dataset(task, cfg.m, cfg.seed)
    n_valid = int(round(cfg.valid_fraction * len(data)))
    if cfg.valid_fraction > 0:
        n_valid = max(1, n_valid)
    if n_valid >= len(data):
        raise PreconditionError("validation split leaves no training examples")
    return data[: len(data) - n_valid], data[len(data) - n_valid:]


def round_loss(steps, loss_name: str, dim: int) -> tuple[float, np.ndarray]:
    """Summed loss and parameter gradient over the collected steps."""
    loss_fn = get_loss(loss_name)
    total = 0.0
    grad = np.zeros(dim)
    for st in steps:
        res = loss_fn(st.scoring())
        total += res.value
        grad += st.features.T @ res.grad_scores
    return total, grad


def decode_cost(problem: Problem, ex: Example, theta: np.ndarray, k: int) -> float:
    space, _, scorer = problem.instance(ex, theta)
    return float(space.terminal_cost(beam_search(space, k, scorer)))


def evaluate(problem: Problem, data: list[Example], theta: np.ndarray, k: int) -> float:
    """Mean terminal cost of beam search decoding."""
    if not data:
        return math.nan
    return float(np.mean([decode_cost(problem, ex, theta, k) for ex in data]))


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, bool):
        return str(int(x))
    return repr(float(x)) if isinstance(x, float) else str(x)


def write_metrics(history: list[dict], path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for row in history:
        w.writerow([_fmt(row.get(c)) for c in METRIC_COLUMNS])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def learn(train: list[Example], valid: list[Example], cfg: RunConfig,
          problem: Problem | None = None, checkpoint_dir=None, keep_thetas: bool = False) -> LearnResult:
    """Run one online pass over ``train`` and return the selected parameters
    together with the regret tracker and the per-round metrics."""
    if not train:
        raise PreconditionError("training set is empty")
    problem = problem or build_problem(cfg)
    strategy = parse_strategy(cfg.strategy)
    if cfg.optimizer == "ogd":
        opt = make_optimizer("ogd", step_scale=cfg.step_scale)
    else:
        opt = make_optimizer("adam", step=cfg.adam_step, beta1=cfg.adam_beta1,
                             beta2=cfg.adam_beta2, epsilon=cfg.adam_epsilon)
    # exact zeros tie every score, and tied perceptron hinges have zero
    # subgradient, so start from a small seeded perturbation
    theta0 = cfg.init_scale * make_rng((cfg.seed, INIT_STREAM)).standard_normal(problem.dim)
    state = LearnerState(theta0, opt)
    tracker = RegretTracker()
    history: list[dict] = []
    result = LearnResult(state, tracker, history)
    u = 0.0

    def validate(t):
        cost = evaluate(problem, valid, state.theta, cfg.k)
        result.validation.append((t, cost))
        if not valid:
            state.best_theta, state.best_round = state.theta.copy(), t
        elif cost < state.best_cost:
            state.best_theta, state.best_cost, state.best_round = state.theta.copy(), cost, t

    validate(0)
    start = time.perf_counter()
    for t, ex in enumerate(train, 1):
        space, table, scorer = problem.instance(ex, state.theta)
        u = max(u, loss_bound_u(space, cfg.loss, cfg.k, cfg.score_clip))
        traj = beam_trajectory(space, table, scorer, cfg.k, strategy, seed=(cfg.seed, t - 1), keep_features=True)
        loss, grad = round_loss(traj.steps, cfg.loss, problem.dim)
        pure = None if strategy.kind == "oracle" else traj.pure_rollin
        tracker.record(loss, traj.final_cost, pure, traj.cost_increase_count, traj.steps)
        if keep_thetas:
            result.thetas.append(state.theta.copy())
        state.theta = state.optimizer.update(state.theta, grad)
        state.round = t
        tracker.u = u

        row = {
            "round": t,
            "surrogate_loss": float(loss),
            "terminal_cost": traj.final_cost,
            "cost_increases": traj.cost_increase_count,
            "pure_rollin": pure,
            "alpha_hat": alpha_hat(tracker),
            "eta": azuma_eta(u, cfg.delta, t),
        }
        if cfg.regret_every and t % cfg.regret_every == 0:
            row["gamma_hat"] = empirical_regret(tracker, cfg.loss, problem.dim).gamma_hat
        if cfg.record_wallclock:
            row["wallclock_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
        history.append(row)

        if cfg.valid_every and t % cfg.valid_every == 0:
            validate(t)
        if checkpoint_dir is not None and cfg.checkpoint_every and t % cfg.checkpoint_every == 0:
            Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
            save_params(Path(checkpoint_dir) / f"theta_{t:06d}.bin", state.theta)
    if not result.validation or result.validation[-1][0] != state.round:
        validate(state.round)
    return result


def mixture_cost(problem: Problem, data: list[Example], thetas: list[np.ndarray], k: int, seed) -> float:
    """Mean cost when each example is decoded with a uniformly drawn iterate."""
    if not data or not thetas:
        return math.nan
    rng = make_rng(seed)
    picks = rng.integers(0, len(thetas), size=len(data))
    return float(np.mean([decode_cost(problem, ex, thetas[i], k) for ex, i in zip(data, picks)]))


def expected_round_losses(problem: Problem, thetas: list[np.ndarray], fresh: list[Example], per_round: int,
                          cfg: RunConfig) -> tuple[np.ndarray, float]:
    """Resampled estimate of each iterate's expected trajectory loss.

    Round ``t`` uses ``fresh[t * per_round:(t + 1) * per_round]`` with the
    frozen ``thetas[t]``.  Also returns the largest absolute score seen.
    """
    if len(fresh) < per_round * len(thetas):
        raise PreconditionError("not enough fresh examples for the resampling schedule")
    strategy = parse_strategy(cfg.strategy)
    loss_fn = get_loss(cfg.loss)
    out = np.empty(len(thetas))
    max_abs = 0.0
    cache: dict = {}
    for t, theta in enumerate(thetas):
        # zero-loss rounds leave the parameters untouched; keep their cache
        if t == 0 or not np.array_equal(theta, thetas[t - 1]):
            cache = {}
        vals = []
        for i, ex in enumerate(fresh[t * per_round:(t + 1) * per_round]):
            key = (ex.tokens, ex.labels)
            # deterministic strategies give one loss per distinct example
            if strategy.kind == "interp" or key not in cache:
                space, table, scorer = problem.instance(ex, theta)
                traj = beam_trajectory(space, table, scorer, cfg.k, strategy, seed=(cfg.seed, t, i))
                cache[key] = sum(loss_fn(st.scoring()).value for st in traj.steps)
                for st in traj.steps:
                    max_abs = max(max_abs, float(np.abs(st.scores).max()))
            vals.append(cache[key])
        out[t] = float(np.mean(vals))
    return out, max_abs
