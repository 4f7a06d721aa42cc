"""Tree-structured search spaces, terminal costs and optimal completion costs.

A search space is any object exposing

* ``initial``: the root node id,
* ``depth``: the uniform terminal depth ``h`` (``None`` for mixed-depth trees),
* ``neighbors(v)``: children of ``v`` in ascending id order,
* ``is_terminal(v)`` / ``terminal_mask(nodes)``,
* ``terminal_cost(v)``.

Node ids are integers and their natural order is the tie-breaking total
order used by every ranking operation downstream.  :class:`TreeSpace` is the
materialized implementation; tasks may supply lazy ones (see
:mod:`beamlearn.tasks`).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Sequence

import numpy as np

from .errors import PreconditionError, StructuralError

__all__ = [
    "TreeSpace",
    "CompletionCostTable",
    "RawGraph",
    "optimal_completion_cost",
    "to_path_space",
    "pad_to_depth",
    "tree_from_nested",
]


class TreeSpace:
    """Materialized rooted tree with costs on its leaves.

    Parameters
    ----------
    children : sequence of sequences of int
        ``children[v]`` lists the neighbors of node ``v``.  Ids must be dense
        in ``[0, len(children))``.
    terminal_cost : mapping or sequence
        Cost of every leaf.  Entries for non-leaves are ignored.
    initial : int
        Root node.
    require_uniform_depth : bool
        When true (the default) all leaves must sit at the same depth.
    origin : sequence, optional
        Per-node back reference to the object the node was derived from
        (e.g. the original terminal for padded chain nodes, or the path
        tuple for path spaces).
    """

    def __init__(
        self,
        children: Sequence[Sequence[int]],
        terminal_cost: Mapping[int, float] | Sequence[float],
        initial: int = 0,
        require_uniform_depth: bool = True,
        origin: Sequence[Hashable] | None = None,
    ):
        n = len(children)
        if n == 0:
            raise StructuralError("search space has no nodes")
        if not 0 <= initial < n:
            raise StructuralError(f"initial node {initial} out of range")
        kids = []
        parent = np.full(n, -1, dtype=np.int64)
        for v, ch in enumerate(children):
            ch = tuple(sorted(int(c) for c in ch))
            if len(set(ch)) != len(ch):
                raise StructuralError(f"node {v} lists a child twice")
            for c in ch:
                if not 0 <= c < n:
                    raise StructuralError(f"child {c} of node {v} out of range")
                if c == initial or parent[c] != -1:
                    raise StructuralError(f"node {c} has more than one parent")
                parent[c] = v
            kids.append(ch)
        self._children = tuple(kids)
        self._parent = parent
        self.initial = int(initial)

        node_depth = np.full(n, -1, dtype=np.int64)
        node_depth[initial] = 0
        bfs = [initial]
        queue = deque([initial])
        while queue:
            v = queue.popleft()
            for c in self._children[v]:
                node_depth[c] = node_depth[v] + 1
                bfs.append(c)
                queue.append(c)
        if len(bfs) != n:
            raise StructuralError("some nodes are unreachable from the initial node")
        self._node_depth = node_depth
        self._bfs = np.asarray(bfs, dtype=np.int64)

        terminal = np.array([len(ch) == 0 for ch in self._children])
        costs = np.full(n, np.nan)
        for v in np.flatnonzero(terminal):
            try:
                c = float(terminal_cost[int(v)])
            except (KeyError, IndexError):
                raise StructuralError(f"terminal node {v} has no cost") from None
            if not np.isfinite(c):
                raise StructuralError(f"terminal node {v} has non-finite cost")
            costs[v] = c
        self._terminal = terminal
        self._terminal_cost = costs

        leaf_depths = np.unique(node_depth[terminal])
        if len(leaf_depths) == 1:
            self.depth: int | None = int(leaf_depths[0])
        else:
            self.depth = None
        if require_uniform_depth:
            if self.depth is None:
                raise StructuralError(
                    f"terminals at mixed depths {leaf_depths.tolist()}; use pad_to_depth"
                )
            if self.depth < 1:
                raise StructuralError("depth must be at least 1")
        self.origin = tuple(origin) if origin is not None else None

    @property
    def n_nodes(self) -> int:
        return len(self._children)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._children[v]

    def parent(self, v: int) -> int:
        return int(self._parent[v])

    def node_depth(self, v: int) -> int:
        return int(self._node_depth[v])

    def is_terminal(self, v: int) -> bool:
        return bool(self._terminal[v])

    def terminal_mask(self, nodes) -> np.ndarray:
        return self._terminal[np.asarray(nodes, dtype=np.int64)]

    def terminal_cost(self, v: int) -> float:
        if not self._terminal[v]:
            raise PreconditionError(f"node {v} is not terminal")
        return float(self._terminal_cost[v])

    def terminals(self) -> np.ndarray:
        return np.flatnonzero(self._terminal)

    def bfs_order(self) -> np.ndarray:
        return self._bfs.copy()

    def __repr__(self):
        return (
            f"TreeSpace(n_nodes={self.n_nodes}, depth={self.depth}, "
            f"n_terminals={int(self._terminal.sum())})"
        )


@dataclass(frozen=True)
class CompletionCostTable:
    """Per-node optimal completion cost ``c*(v)`` of a materialized space."""

    costs: np.ndarray

    def __getitem__(self, v: int) -> float:
        return float(self.costs[v])

    def lookup(self, nodes) -> np.ndarray:
        return self.costs[np.asarray(nodes, dtype=np.int64)]


def optimal_completion_cost(space: TreeSpace) -> CompletionCostTable:
    """Compute ``c*`` with a single bottom-up pass over ``space``."""
    if not isinstance(space, TreeSpace):
        raise PreconditionError(
            "optimal_completion_cost needs a materialized TreeSpace; "
            "lazy task spaces provide their own analytic table"
        )
    costs = np.empty(space.n_nodes)
    for v in space.bfs_order()[::-1]:
        ch = space.neighbors(int(v))
        if ch:
            costs[v] = costs[list(ch)].min()
        else:
            costs[v] = space.terminal_cost(int(v))
    costs.setflags(write=False)
    return CompletionCostTable(costs)


@dataclass(frozen=True)
class RawGraph:
    """Finite directed graph, possibly cyclic, with costed terminal nodes.

    ``terminal_costs`` flags which nodes are terminal.  A flagged node may
    still have outgoing edges.
    """

    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    initial: int
    terminal_costs: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        node_set = set(self.nodes)
        if self.initial not in node_set:
            raise StructuralError(f"initial node {self.initial} not in graph")
        for a, b in self.edges:
            if a not in node_set or b not in node_set:
                raise StructuralError(f"edge ({a}, {b}) references an unknown node")
        if not self.terminal_costs:
            raise StructuralError("graph has no terminal nodes")

    def successors(self, v: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == v})


def to_path_space(graph: RawGraph, max_path_length: int) -> TreeSpace:
    """Unroll ``graph`` into the tree of its paths from the initial node.

    Each output node is a path (tuple of input nodes); its neighbors extend
    the path by one edge.  Paths have at most ``max_path_length`` edges.
    Paths that cannot be extended to one ending at a terminal-flagged node
    within the bound are pruned, so every leaf is a path ending at a
    terminal and carries that terminal's cost.  Ids follow DFS preorder
    with successors visited in ascending order, which makes id order the
    lexicographic order on node sequences.

    The result may have terminals at mixed depths; see :func:`pad_to_depth`.
    """
    if max_path_length < 0:
        raise PreconditionError("max_path_length must be nonnegative")
    succ = {v: graph.successors(v) for v in graph.nodes}
    terminal_costs = dict(graph.terminal_costs)

    # viable[(v, r)]: a terminal is reachable from v using at most r more edges
    viable: dict[tuple[int, int], bool] = {}
    for r in range(max_path_length + 1):
        for v in graph.nodes:
            ok = v in terminal_costs
            if not ok and r > 0:
                ok = any(viable[(w, r - 1)] for w in succ[v])
            viable[(v, r)] = ok
    if not viable[(graph.initial, max_path_length)]:
        raise StructuralError(
            f"no terminal reachable within {max_path_length} edges of the initial node"
        )

    paths: list[tuple[int, ...]] = []
    children: list[list[int]] = []
    costs: dict[int, float] = {}

    def visit(path: tuple[int, ...]) -> int:
        me = len(paths)
        paths.append(path)
        children.append([])
        remaining = max_path_length - (len(path) - 1)
        if remaining > 0:
            for w in succ[path[-1]]:
                if viable[(w, remaining - 1)]:
                    children[me].append(visit(path + (w,)))
        if not children[me]:
            costs[me] = float(terminal_costs[path[-1]])
        return me

    visit((graph.initial,))
    return TreeSpace(children, costs, initial=0, require_uniform_depth=False, origin=paths)


def pad_to_depth(space: TreeSpace) -> TreeSpace:
    """Extend shallow terminals with linear chains so all leaves share a depth.

    Existing node ids are kept.  A terminal at depth ``d < h`` becomes
    internal and gains ``h - d`` chain nodes, the last of which is terminal
    with the original cost.  ``origin`` of every chain node is the id of the
    original terminal; ``origin`` of original nodes is their own id.
    """
    terminals = space.terminals()
    depths = np.array([space.node_depth(int(v)) for v in terminals])
    h = int(depths.max())
    children = [list(space.neighbors(v)) for v in range(space.n_nodes)]
    origin: list[Hashable] = list(range(space.n_nodes))
    costs: dict[int, float] = {}
    for v, d in zip(terminals.tolist(), depths.tolist()):
        cost = space.terminal_cost(v)
        prev = v
        for _ in range(h - d):
            new = len(children)
            children.append([])
            origin.append(v)
            children[prev].append(new)
            prev = new
        costs[prev] = cost
    return TreeSpace(children, costs, initial=space.initial, origin=origin)


def tree_from_nested(nested, costs_out: list | None = None) -> TreeSpace:
    """Build a :class:`TreeSpace` from nested lists with numeric leaves.

    ``[[0, 1], [2, [3, 4]]]`` is a root with two children; numbers are leaf
    costs.  Ids are assigned breadth-first, left to right.  Handy for small
    hand-built fixtures.
    """
    children: list[list[int]] = [[]]
    costs: dict[int, float] = {}
    queue = deque([(0, nested)])
    while queue:
        v, sub = queue.popleft()
        if isinstance(sub, (int, float)):
            costs[v] = float(sub)
            continue
        for item in sub:
            c = len(children)
            children.append([])
            children[v].append(c)
            queue.append((c, item))
    if costs_out is not None:
        costs_out.extend(costs.items())
    return TreeSpace(children, costs, require_uniform_depth=False)

