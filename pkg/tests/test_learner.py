import numpy as np
import pytest

from beamlearn.config import RunConfig
from beamlearn.errors import PreconditionError
from beamlearn.learner import (
    METRIC_COLUMNS,
    Problem,
    build_problem,
    evaluate,
    learn,
    make_datasets,
    mixture_cost,
    write_metrics,
)
from beamlearn.scoring import FeatureVector


def small(**kw):
    base = dict(length=3, num_labels=2, vocab_size=4, m=100, feature_dim=256, k=2, valid_every=25)
    base.update(kw)
    return RunConfig(**base)


def test_zero_features_never_move_params():
    cfg = small(init_scale=0.0)
    problem = Problem(2, lambda ex, space: (lambda v: FeatureVector.empty()), 8)
    train, valid = make_datasets(cfg)
    res = learn(train, valid, cfg, problem=problem)
    assert not res.state.theta.any()
    costs = {c for _, c in res.validation}
    assert len(costs) == 1


def test_separable_perceptron_first_stops_increasing_cost():
    cfg = small(loss="perceptron_first", strategy="continue", m=500, valid_fraction=0.0, valid_every=0)
    train, valid = make_datasets(cfg)
    res = learn(train, valid, cfg)
    incs = res.tracker.cost_increases
    assert len(incs) == 500
    assert sum(incs[-100:]) == 0
    assert sum(incs[:50]) > 0


def test_oracle_strategy_has_no_increases():
    cfg = small(strategy="oracle", loss="log_neighbors", k=1)
    res = learn(*make_datasets(cfg), cfg)
    assert sum(res.tracker.cost_increases) == 0
    assert all(f is None for f in res.tracker.pure_rollin)


def test_training_improves_validation_cost():
    cfg = small(m=300, noise=0.0)
    res = learn(*make_datasets(cfg), cfg)
    first, last = res.validation[0][1], res.validation[-1][1]
    assert last < first and last == 0.0
    assert res.state.best_cost == min(c for _, c in res.validation)


def test_runs_are_deterministic():
    cfg = small(strategy="interp:0.5", m=60, regret_every=20)
    a = learn(*make_datasets(cfg), cfg)
    b = learn(*make_datasets(cfg), cfg)
    assert write_metrics(a.history) == write_metrics(b.history)
    assert np.array_equal(a.state.theta, b.state.theta)


def test_metrics_layout():
    cfg = small(m=20, regret_every=5)
    res = learn(*make_datasets(cfg), cfg)
    lines = write_metrics(res.history).splitlines()
    assert lines[0] == ",".join(METRIC_COLUMNS)
    assert len(lines) == 1 + len(res.history)
    row = dict(zip(METRIC_COLUMNS, lines[5].split(",")))
    assert row["round"] == "5" and row["gamma_hat"] != "" and row["wallclock_ms"] == ""
    assert row["pure_rollin"] in ("0", "1")


def test_checkpoints_are_written(tmp_path):
    cfg = small(m=20, checkpoint_every=4)
    learn(*make_datasets(cfg), cfg, checkpoint_dir=tmp_path)
    assert len(list(tmp_path.glob("theta_*.bin"))) == 4


def test_empty_training_set_rejected():
    with pytest.raises(PreconditionError):
        learn([], [], small())


def test_mixture_of_identical_iterates_matches_single():
    cfg = small(m=40)
    train, valid = make_datasets(cfg)
    res = learn(train, valid, cfg)
    problem = build_problem(cfg)
    theta = res.state.theta
    assert mixture_cost(problem, valid, [theta, theta], cfg.k, (0, 1)) == evaluate(problem, valid, theta, cfg.k)


def test_expected_round_losses_match_uncached_recomputation():
    from beamlearn.data_collection import beam_trajectory
    from beamlearn.learner import expected_round_losses
    from beamlearn.losses import get_loss
    from beamlearn.tasks import SequenceTask, generate_dataset

    task = SequenceTask.simple(2, 3, 2, noise=0.1)
    cfg = small(vocab_size=2, noise=0.1, m=30, valid_fraction=0.0, valid_every=0)
    problem = build_problem(cfg)
    res = learn(generate_dataset(task, 30, seed=1), [], cfg, problem=problem, keep_thetas=True)
    fresh = generate_dataset(task, 30 * 5, seed=2)
    got, max_abs = expected_round_losses(problem, res.thetas, fresh, 5, cfg)
    fn = get_loss(cfg.loss)
    want = []
    for t, theta in enumerate(res.thetas):
        vals = []
        for ex in fresh[t * 5:(t + 1) * 5]:
            space, table, scorer = problem.instance(ex, theta)
            tr = beam_trajectory(space, table, scorer, cfg.k, cfg.strategy)
            vals.append(sum(fn(st.scoring()).value for st in tr.steps))
        want.append(np.mean(vals))
    assert np.array_equal(got, np.array(want))
    assert max_abs > 0
