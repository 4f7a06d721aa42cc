import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beamlearn.errors import PreconditionError, StructuralError
from beamlearn.oracles import brute_force_completion_costs, random_tree_space
from beamlearn.search_space import (
    RawGraph,
    TreeSpace,
    optimal_completion_cost,
    pad_to_depth,
    to_path_space,
    tree_from_nested,
)
from beamlearn.tasks import Example, hamming_space


def binary_chain(gold):
    """Materialized label-prefix tree with Hamming terminal costs."""
    L = len(gold)
    children, costs, prefixes = [[]], {}, [()]
    frontier = [0]
    for _ in range(L):
        new = []
        for v in frontier:
            for lab in (0, 1):
                children.append([])
                prefixes.append(prefixes[v] + (lab,))
                children[v].append(len(children) - 1)
                new.append(len(children) - 1)
        frontier = new
    for v in frontier:
        costs[v] = float(sum(a != b for a, b in zip(prefixes[v], gold)))
    return TreeSpace(children, costs), prefixes


def test_terminal_base_case():
    space = tree_from_nested([[3, 5]])
    table = optimal_completion_cost(space)
    leaf = [v for v in range(space.n_nodes) if space.is_terminal(v)][0]
    assert table[leaf] == 3


def test_prefix_completion_cost_counts_mismatches():
    space, prefixes = binary_chain((0, 0))
    table = optimal_completion_cost(space)
    v = prefixes.index((1,))
    assert table[v] == 1
    assert table[space.initial] == 0


def test_root_is_zero_when_some_terminal_is_free():
    space = tree_from_nested([[4, 0], [2, 7]])
    assert optimal_completion_cost(space)[space.initial] == 0


def test_bellman_consistency_on_random_spaces():
    for seed in range(30):
        space = random_tree_space(seed)
        table = optimal_completion_cost(space)
        for v in range(space.n_nodes):
            ch = space.neighbors(v)
            if ch:
                assert table[v] == min(table[c] for c in ch)
            else:
                assert table[v] == space.terminal_cost(v)


def test_table_matches_exhaustive_subtree_minimum():
    for seed in range(20):
        space = random_tree_space(seed)
        table = optimal_completion_cost(space)
        nodes = list(range(space.n_nodes))
        assert table.lookup(np.array(nodes)).tolist() == brute_force_completion_costs(space, nodes)


def test_rejects_mixed_depth_unless_allowed():
    with pytest.raises(StructuralError):
        TreeSpace([[1, 2], [], [3], []], {1: 0.0, 3: 1.0})
    space = TreeSpace([[1, 2], [], [3], []], {1: 0.0, 3: 1.0}, require_uniform_depth=False)
    assert space.depth is None


def test_rejects_structural_problems():
    with pytest.raises(StructuralError):
        TreeSpace([[1], [0]], {})  # cycle through the root
    with pytest.raises(StructuralError):
        TreeSpace([[1, 2], [3], [3], []], {3: 0.0})  # two parents
    with pytest.raises(StructuralError):
        TreeSpace([[1], [], []], {1: 0.0, 2: 0.0})  # unreachable node
    with pytest.raises(StructuralError):
        TreeSpace([[1], []], {})  # leaf without cost


def test_completion_cost_rejects_non_tree_inputs():
    with pytest.raises(PreconditionError):
        optimal_completion_cost(object())


def test_path_space_of_a_tree_is_isomorphic():
    nodes = [0, 1, 2, 3]
    edges = [(0, 1), (0, 2), (1, 3)]
    g = RawGraph(nodes, edges, 0, {2: 1.0, 3: 0.0})
    ps = to_path_space(g, 5)
    assert ps.n_nodes == 4
    assert sorted(len(ps.neighbors(v)) for v in range(ps.n_nodes)) == [0, 0, 1, 2]


def test_path_space_unrolls_a_cycle():
    g = RawGraph(["a", "b"], [("a", "b"), ("b", "a")], "a", {"b": 0.0})
    ps = to_path_space(g, 4)
    paths = [ps.origin[v] for v in range(ps.n_nodes)]
    assert paths == [("a",), ("a", "b"), ("a", "b", "a"), ("a", "b", "a", "b")]
    assert [v for v in range(ps.n_nodes) if ps.is_terminal(v)] == [3]


def test_path_space_single_terminal_node():
    ps = to_path_space(RawGraph([0], [], 0, {0: 2.0}), 3)
    assert ps.n_nodes == 1 and ps.is_terminal(0) and ps.terminal_cost(0) == 2.0


def test_path_space_without_reachable_terminal_fails():
    with pytest.raises(StructuralError):
        to_path_space(RawGraph([0, 1], [(0, 1), (1, 0)], 0, {}), 3)


def _count_bounded_paths(nodes, edges, initial, terminals, max_len):
    succ = {v: [b for a, b in edges if a == v] for v in nodes}
    count = 0

    def viable(path):
        if path[-1] in terminals:
            return True
        return len(path) - 1 < max_len and any(viable(path + (w,)) for w in succ[path[-1]])

    stack = [(initial,)]
    while stack:
        p = stack.pop()
        if not viable(p):
            continue
        count += 1
        if p[-1] in terminals and not succ[p[-1]]:
            continue
        if len(p) - 1 < max_len:
            stack.extend(p + (w,) for w in succ[p[-1]])
    return count


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_path_space_node_count_matches_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 6))
    nodes = list(range(n))
    edges = [(a, b) for a, b in itertools.product(nodes, nodes) if a != b and rng.random() < 0.35]
    sinks = [v for v in nodes if not any(a == v for a, _ in edges)]
    terminals = {v: float(rng.integers(0, 3)) for v in sinks}
    if not terminals:
        return
    try:
        ps = to_path_space(RawGraph(nodes, edges, 0, terminals), 4)
    except StructuralError:
        return
    assert ps.n_nodes == _count_bounded_paths(nodes, edges, 0, set(terminals), 4)


def test_pad_to_depth_extends_short_branches():
    space = TreeSpace([[1, 2], [], [3], [4], []], {1: 5.0, 4: 2.0}, require_uniform_depth=False)
    padded = pad_to_depth(space)
    assert padded.depth == 3
    assert padded.n_nodes == space.n_nodes + 2
    costs = sorted(padded.terminal_cost(int(v)) for v in padded.terminals())
    assert costs == [2.0, 5.0]


def test_pad_to_depth_is_identity_on_uniform_trees():
    space = random_tree_space(3)
    padded = pad_to_depth(space)
    assert padded.n_nodes == space.n_nodes
    assert all(padded.neighbors(v) == space.neighbors(v) for v in range(space.n_nodes))


def test_pad_to_depth_preserves_cost_multiset_on_path_spaces():
    g = RawGraph([0, 1, 2, 3], [(0, 1), (0, 2), (2, 3)], 0, {1: 4.0, 3: 1.0})
    ps = to_path_space(g, 5)
    padded = pad_to_depth(ps)
    assert padded.depth == 2
    before = sorted(ps.terminal_cost(int(v)) for v in ps.terminals())
    after = sorted(padded.terminal_cost(int(v)) for v in padded.terminals())
    assert before == after


def test_hamming_analytic_costs_match_generic_table():
    for L in range(1, 9):
        for K in (2, 3, 4):
            gold = [(i * 7 + L) % K for i in range(L)]
            space, table = hamming_space(Example([0] * L, gold), K)
            n = space.n_nodes
            children = [list(space.neighbors(v)) for v in range(n)]
            costs = {v: space.terminal_cost(v) for v in range(n) if space.is_terminal(v)}
            generic = optimal_completion_cost(TreeSpace(children, costs))
            nodes = np.arange(n)
            assert np.array_equal(table.lookup(nodes), generic.lookup(nodes))
