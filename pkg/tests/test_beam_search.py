import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlearn.beam_search import (
    Beam,
    BeamTransition,
    ScoredCandidate,
    beam_cost,
    beam_search,
    best,
    expand,
    initial_beam,
    oracle_scores,
    policy_step,
    transition_cost,
)
from beamlearn.errors import PreconditionError, StructuralError
from beamlearn.oracles import brute_force_best_terminal, brute_force_policy_cost, random_tree_space
from beamlearn.search_space import TreeSpace, optimal_completion_cost, tree_from_nested


def table_scorer(values):
    values = np.asarray(values, dtype=float)
    return lambda nodes: values[np.asarray(nodes, dtype=np.int64)]


def test_best_breaks_ties_by_node_id():
    assert best([ScoredCandidate(1, 2.0), ScoredCandidate(2, 2.0), ScoredCandidate(3, 1.0)], 2) == [1, 2]
    assert best([(2, 2.0), (1, 2.0)], 1) == [1]


def test_best_truncates_to_available_candidates():
    assert best([(1, 1.0)], 5) == [1]
    assert best([(1, 0.0), (2, 3.0), (3, 1.0)], 1) == [2]


def test_best_rejects_bad_input():
    with pytest.raises(PreconditionError):
        best([], 1)
    with pytest.raises(PreconditionError):
        best([(1, 0.0)], 0)
    with pytest.raises(PreconditionError):
        best([(1, float("nan"))], 1)


def test_beam_rejects_duplicates_and_emptiness():
    with pytest.raises(StructuralError):
        Beam(())
    with pytest.raises(StructuralError):
        Beam((1, 1))


def test_expand_unions_and_sorts():
    space = tree_from_nested([[[0, 1], [2]], [[3]]])
    root = initial_beam(space)
    assert expand(space, root).tolist() == list(space.neighbors(0))
    b = Beam(tuple(space.neighbors(0)))
    kids = expand(space, b)
    assert kids.tolist() == sorted(set(space.neighbors(1)) | set(space.neighbors(2)))
    leaf = int(space.terminals()[0])
    with pytest.raises(PreconditionError):
        expand(space, Beam((leaf,)))


def three_way_space():
    # root -> 1, 2, 3; each with one terminal child
    return TreeSpace([[1, 2, 3], [4], [5], [6], [], [], []], {4: 0.0, 5: 1.0, 6: 1.0})


def test_policy_step_takes_top_k_non_terminals():
    space = three_way_space()
    scores = np.zeros(7)
    scores[[1, 2, 3]] = [1.0, 4.0, 0.0]
    b = policy_step(space, initial_beam(space), 2, table_scorer(scores))
    assert b.members == (2, 1)


def test_policy_step_equal_scores_keep_lowest_ids():
    space = three_way_space()
    b = policy_step(space, initial_beam(space), 2, table_scorer(np.zeros(7)))
    assert b.members == (1, 2)


def test_policy_step_terminal_singleton():
    space = three_way_space()
    b = Beam((1, 2, 3))
    scores = np.zeros(7)
    scores[[4, 5, 6]] = [0.0, 3.0, 1.0]
    assert policy_step(space, b, 3, table_scorer(scores)).members == (5,)


def test_tied_children_drop_the_best_one():
    space = three_way_space()
    table = optimal_completion_cost(space)
    scores = np.zeros(7)
    scores[[1, 2, 3]] = [1.0, 5.0, 5.0]
    b0 = initial_beam(space)
    b1 = policy_step(space, b0, 2, table_scorer(scores))
    assert b1.members == (2, 3)
    assert transition_cost(table, b0, b1) == 1.0
    rec = BeamTransition(b0, b1, transition_cost(table, b0, b1))
    assert rec.cost_increase


def test_beam_cost_is_member_minimum():
    space = three_way_space()
    table = optimal_completion_cost(space)
    assert beam_cost(table, Beam((5, 4))) == 0.0
    assert beam_cost(table, Beam((6,))) == 1.0
    assert beam_cost(table, Beam(tuple(space.neighbors(0)))) == table[0]


def test_transition_cost_zero_when_nothing_dropped():
    space = three_way_space()
    table = optimal_completion_cost(space)
    rng = np.random.default_rng(0)
    b1 = policy_step(space, initial_beam(space), 3, table_scorer(rng.normal(size=7)))
    assert transition_cost(table, initial_beam(space), b1) == 0.0


def test_oracle_decoding_finds_optimum_for_every_width():
    for seed in range(30):
        space = random_tree_space(seed)
        table = optimal_completion_cost(space)
        _, opt = brute_force_best_terminal(space)
        for k in (1, 2, 3, 100):
            assert space.terminal_cost(beam_search(space, k, oracle_scores(table))) == opt


def test_greedy_errs_where_a_wider_beam_recovers():
    # 7-node depth-2 tree: root -> {1, 2}; 1 -> {3, 4}; 2 -> {5, 6}
    space = TreeSpace([[1, 2], [3, 4], [5, 6], [], [], [], []], {3: 2.0, 4: 3.0, 5: 0.0, 6: 4.0})
    scores = np.array([0.0, 1.0, 0.5, 0.2, 0.1, 0.9, 0.0])
    g = beam_search(space, 1, table_scorer(scores))
    b = beam_search(space, 2, table_scorer(scores))
    assert g == 3 and space.terminal_cost(g) == 2.0
    assert b == 5 and space.terminal_cost(b) == 0.0


def test_beam_search_takes_depth_steps():
    space = random_tree_space(7, depth=4)
    _, beams = beam_search(space, 2, table_scorer(np.arange(space.n_nodes)), return_beams=True)
    assert len(beams) == space.depth + 1
    assert len(beams[-1]) == 1 and space.is_terminal(beams[-1].members[0])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_matches_step_by_step_simulation(seed, k):
    space = random_tree_space(seed)
    rng = np.random.default_rng(seed)
    scorer = table_scorer(rng.integers(0, 3, size=space.n_nodes))
    assert space.terminal_cost(beam_search(space, k, scorer)) == brute_force_policy_cost(space, k, scorer)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_telescoping_and_monotone_costs(seed, k):
    space = random_tree_space(seed)
    table = optimal_completion_cost(space)
    scorer = table_scorer(np.random.default_rng(seed).normal(size=space.n_nodes))
    _, beams = beam_search(space, k, scorer, return_beams=True)
    deltas = [transition_cost(table, a, b) for a, b in zip(beams, beams[1:])]
    assert all(d >= 0 for d in deltas)
    assert beam_cost(table, beams[-1]) - beam_cost(table, beams[0]) == pytest.approx(sum(deltas), abs=1e-9)


def test_determinism():
    space = random_tree_space(11)
    scorer = table_scorer(np.random.default_rng(1).normal(size=space.n_nodes))
    a = beam_search(space, 3, scorer, return_beams=True)
    b = beam_search(space, 3, scorer, return_beams=True)
    assert a == b
