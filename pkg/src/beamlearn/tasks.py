"""Synthetic sequence labeling with Hamming cost.

Examples are (tokens, gold labels) pairs sampled from a hidden Markov
generator.  Each example induces a label-prefix tree whose node ids are
dense and breadth-first: the prefix ``y_1..y_j`` over ``K`` labels has id
``offset(j) + sum_i y_i K^(j-i)``, so ascending id order within a depth is
lexicographic order on label sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConfigurationError, PreconditionError
from .scoring import FeatureVector

__all__ = [
    "SequenceTask",
    "Example",
    "generate_dataset",
    "write_jsonl",
    "read_jsonl",
    "HammingSpace",
    "HammingCostTable",
    "HammingFeatures",
    "hamming_space",
    "garden_path_dataset",
]


@dataclass(frozen=True)
class Example:
    tokens: tuple[int, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        object.__setattr__(self, "labels", tuple(int(y) for y in self.labels))
        if len(self.tokens) != len(self.labels) or not self.tokens:
            raise PreconditionError("tokens and labels must be nonempty and equally long")


@dataclass(frozen=True)
class SequenceTask:
    """HMM-style generator of labeled token sequences.

    ``transition[a, b]`` is P(next label b | label a) and
    ``emission[a, v]`` is P(token v | label a).  The first label is drawn
    from the stationary distribution of ``transition``.  With probability
    ``noise`` a position emits its token from a uniformly chosen different
    label instead of its own.
    """

    vocab_size: int
    num_labels: int
    length: int
    emission: np.ndarray
    transition: np.ndarray
    noise: float = 0.0
    initial: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.length < 1:
            raise ConfigurationError("length must be >= 1")
        if self.num_labels < 2:
            raise ConfigurationError("num_labels must be >= 2")
        if not 0.0 <= self.noise < 1.0:
            raise ConfigurationError("noise must lie in [0, 1)")
        em = np.asarray(self.emission, dtype=float)
        tr = np.asarray(self.transition, dtype=float)
        if em.shape != (self.num_labels, self.vocab_size):
            raise ConfigurationError(f"emission must have shape {(self.num_labels, self.vocab_size)}")
        if tr.shape != (self.num_labels, self.num_labels):
            raise ConfigurationError("transition must be num_labels x num_labels")
        for name, m in (("emission", em), ("transition", tr)):
            if np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0):
                raise ConfigurationError(f"{name} rows must be probability distributions")
        object.__setattr__(self, "emission", em)
        object.__setattr__(self, "transition", tr)
        if self.initial is None:
            object.__setattr__(self, "initial", stationary_distribution(tr))

    @classmethod
    def simple(
        cls,
        num_labels: int,
        length: int,
        vocab_size: int | None = None,
        noise: float = 0.0,
        stickiness: float = 0.0,
    ) -> "SequenceTask":
        """Deterministic emissions: token ``v`` belongs to label ``v % K``.

        ``stickiness`` is the extra probability of repeating the previous
        label; 0 gives uniform transitions.
        """
        vocab_size = num_labels if vocab_size is None else vocab_size
        if vocab_size < num_labels:
            raise ConfigurationError("vocab_size must be >= num_labels")
        em = np.zeros((num_labels, vocab_size))
        for v in range(vocab_size):
            em[v % num_labels, v] = 1.0
        em /= em.sum(axis=1, keepdims=True)
        tr = np.full((num_labels, num_labels), (1.0 - stickiness) / num_labels)
        tr[np.diag_indices(num_labels)] += stickiness
        return cls(vocab_size, num_labels, length, em, tr, noise)


def stationary_distribution(transition: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eig(transition.T)
    v = np.real(vecs[:, np.argmin(np.abs(vals - 1.0))])
    v = np.abs(v) / np.abs(v).sum()
    return v


def generate_dataset(task: SequenceTask, m: int, seed) -> list[Example]:
    """Sample ``m`` examples; identical seeds give identical datasets."""
    if m < 1:
        raise PreconditionError("m must be >= 1")
    rng = np.random.default_rng(seed)
    K, L = task.num_labels, task.length
    em_cdf = np.cumsum(task.emission, axis=1)
    tr_cdf = np.cumsum(task.transition, axis=1)
    init_cdf = np.cumsum(task.initial)
    out = []
    for _ in range(m):
        labels = np.empty(L, dtype=np.int64)
        labels[0] = min(np.searchsorted(init_cdf, rng.random(), side="right"), K - 1)
        for j in range(1, L):
            labels[j] = min(np.searchsorted(tr_cdf[labels[j - 1]], rng.random(), side="right"), K - 1)
        flips = rng.random(L) < task.noise
        shift = rng.integers(1, K, size=L)
        source = np.where(flips, (labels + shift) % K, labels)
        u = rng.random(L)
        tokens = [
            min(int(np.searchsorted(em_cdf[a], x, side="right")), task.vocab_size - 1)
            for a, x in zip(source, u)
        ]
        out.append(Example(tokens, labels.tolist()))
    return out


def write_jsonl(path: str | Path, examples: Iterable[Example]) -> None:
    with open(path, "w") as fh:
        for ex in examples:
            fh.write(json.dumps({"tokens": list(ex.tokens), "labels": list(ex.labels)}) + "\n")


def read_jsonl(path: str | Path) -> list[Example]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out.append(Example(rec["tokens"], rec["labels"]))
            except (KeyError, ValueError, TypeError) as exc:
                raise ConfigurationError(f"{path}:{lineno}: bad record ({exc})") from None
    return out


class HammingSpace:
    """Lazy label-prefix tree of one example (depth = sequence length)."""

    def __init__(self, length: int, num_labels: int, gold: Sequence[int] | None = None):
        if length < 1 or num_labels < 1:
            raise PreconditionError("length and num_labels must be positive")
        self.length = length
        self.num_labels = num_labels
        self.depth = length
        self.initial = 0
        K = num_labels
        self._offsets = np.cumsum([0] + [K**j for j in range(length + 1)])
        self._gold = None if gold is None else np.asarray(gold, dtype=np.int64)

    @property
    def n_nodes(self) -> int:
        return int(self._offsets[-1])

    def node_depth_many(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        return np.searchsorted(self._offsets, nodes, side="right") - 1

    def node_depth(self, v: int) -> int:
        return int(self.node_depth_many([v])[0])

    def node_id(self, prefix: Sequence[int]) -> int:
        j = len(prefix)
        r = 0
        for y in prefix:
            if not 0 <= y < self.num_labels:
                raise PreconditionError(f"label {y} out of range")
            r = r * self.num_labels + int(y)
        return int(self._offsets[j] + r)

    def prefix(self, v: int) -> tuple[int, ...]:
        j = self.node_depth(v)
        r = v - int(self._offsets[j])
        out = []
        for _ in range(j):
            r, y = divmod(r, self.num_labels)
            out.append(y)
        return tuple(reversed(out))

    def digits(self, nodes, depth: int) -> np.ndarray:
        """Label matrix of same-depth nodes, shape ``(len(nodes), depth)``."""
        r = np.asarray(nodes, dtype=np.int64) - self._offsets[depth]
        pw = self.num_labels ** np.arange(depth - 1, -1, -1, dtype=np.int64)
        return (r[:, None] // pw[None, :]) % self.num_labels

    def neighbors(self, v: int) -> tuple[int, ...]:
        j = self.node_depth(v)
        if j == self.length:
            return ()
        r = v - int(self._offsets[j])
        base = int(self._offsets[j + 1]) + r * self.num_labels
        return tuple(range(base, base + self.num_labels))

    def is_terminal(self, v: int) -> bool:
        return v >= self._offsets[self.length]

    def terminal_mask(self, nodes) -> np.ndarray:
        return np.asarray(nodes, dtype=np.int64) >= self._offsets[self.length]

    def terminal_cost(self, v: int) -> float:
        """Hamming distance between the labeling at ``v`` and the gold labels."""
        if self._gold is None:
            raise PreconditionError("space was built without gold labels")
        if not self.is_terminal(v):
            raise PreconditionError(f"node {v} is not terminal")
        dig = self.digits([v], self.length)[0]
        return float((dig != self._gold).sum())


class HammingCostTable:
    """Analytic completion cost: mismatches between a prefix and the gold
    prefix of the same length (the gold suffix is always reachable)."""

    def __init__(self, space: HammingSpace, gold: Sequence[int]):
        if len(gold) != space.length:
            raise PreconditionError("gold labels must match the space length")
        self.space = space
        self.gold = np.asarray(gold, dtype=np.int64)

    def lookup(self, nodes) -> np.ndarray:
        nodes = np.asarray(nodes, dtype=np.int64)
        depths = self.space.node_depth_many(nodes)
        if nodes.size and depths[0] > 0 and np.all(depths == depths[0]):
            d = int(depths[0])
            return (self.space.digits(nodes, d) != self.gold[None, :d]).sum(axis=1).astype(float)
        out = np.empty(nodes.shape[0])
        for d in np.unique(depths):
            sel = depths == d
            if d == 0:
                out[sel] = 0.0
                continue
            dig = self.space.digits(nodes[sel], int(d))
            out[sel] = (dig != self.gold[None, :d]).sum(axis=1)
        return out

    def __getitem__(self, v: int) -> float:
        return float(self.lookup([v])[0])


def hamming_space(example: Example, num_labels: int):
    """Search space and completion cost table for one example."""
    if max(example.labels) >= num_labels:
        raise PreconditionError("gold label exceeds num_labels")
    space = HammingSpace(len(example.labels), num_labels, example.labels)
    return space, HammingCostTable(space, example.labels)


class HammingFeatures:
    """Cumulative hashed indicator features of a label prefix.

    A prefix ``y_1..y_j`` fires, at every position ``i <= j``, one feature
    for the label ``y_i``, one for the pair ``(y_{i-1}, y_i)`` (with a start
    symbol before position 1) and one for ``(y_i, token_i)``.  Each
    feature is mapped to one of ``dim`` buckets by a fixed seeded table.
    """

    def __init__(self, example: Example, space: HammingSpace, tables: "FeatureTables"):
        self.space = space
        self.tokens = np.asarray(example.tokens, dtype=np.int64)
        self.tables = tables
        if self.tokens.max() >= tables.emission.shape[1]:
            raise ConfigurationError("token id exceeds the feature table vocabulary")

    def _columns(self, dig: np.ndarray) -> np.ndarray:
        n, d = dig.shape
        prev = np.concatenate([np.full((n, 1), self.space.num_labels), dig[:, :-1]], axis=1)
        t = self.tables
        return np.concatenate(
            [t.label[dig], t.transition[prev, dig], t.emission[dig, self.tokens[None, :d]]],
            axis=1,
        )

    def __call__(self, v: int) -> FeatureVector:
        d = self.space.node_depth(v)
        if d == 0:
            return FeatureVector.empty()
        cols = self._columns(self.space.digits([v], d))[0]
        return FeatureVector(cols, np.ones(cols.size))

    def matrix(self, nodes, dim: int) -> sp.csr_matrix:
        nodes = np.asarray(nodes, dtype=np.int64)
        depths = self.space.node_depth_many(nodes)
        if len(nodes) and np.all(depths == depths[0]) and depths[0] > 0:
            cols = self._columns(self.space.digits(nodes, int(depths[0])))
            n, w = cols.shape
            indptr = np.arange(0, n * w + 1, w)
            mat = sp.csr_matrix((np.ones(n * w), cols.ravel(), indptr), shape=(n, dim))
            mat.sum_duplicates()
            return mat
        rows = [self(int(v)) for v in nodes]
        data = np.concatenate([r.values for r in rows]) if rows else np.zeros(0)
        idx = np.concatenate([r.indices for r in rows]) if rows else np.zeros(0, dtype=np.int64)
        indptr = np.cumsum([0] + [len(r.indices) for r in rows])
        mat = sp.csr_matrix((data, idx, indptr), shape=(len(nodes), dim))
        mat.sum_duplicates()
        return mat


@dataclass(frozen=True)
class FeatureTables:
    """Bucket assignment for every (kind, a, b) indicator feature."""

    label: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    dim: int

    @classmethod
    def build(cls, num_labels: int, vocab_size: int, dim: int, seed: int = 0) -> "FeatureTables":
        if dim < 1:
            raise ConfigurationError("feature dimension must be >= 1")
        rng = np.random.default_rng(seed)
        return cls(
            label=rng.integers(0, dim, size=num_labels),
            transition=rng.integers(0, dim, size=(num_labels + 1, num_labels)),
            emission=rng.integers(0, dim, size=(num_labels, vocab_size)),
            dim=dim,
        )

    def feature_map(self, example: Example, space: HammingSpace) -> HammingFeatures:
        return HammingFeatures(example, space, self)


def garden_path_dataset(m: int, seed, length: int = 2) -> list[Example]:
    """Examples where the first label is only revealed by the second token.

    Labels are ``{0, 1, 2, 3}`` and the vocabulary ``{0, 1, 2}``.  The first
    token is always 0 while the first gold label is 0 or 1 uniformly; the
    second gold label is ``first + 2`` and emits token ``first + 1``.  Any
    further positions copy the pattern of the second one.  A greedy decoder
    sees identical features for both first-label choices across the two
    example types, so it errs on one of them; a beam of width 2 can wait for
    the second token.
    """
    if length < 2:
        raise PreconditionError("garden path examples need length >= 2")
    rng = np.random.default_rng(seed)
    out = []
    for first in rng.integers(0, 2, size=m).tolist():
        tokens = [0] + [first + 1] * (length - 1)
        labels = [first] + [first + 2] * (length - 1)
        out.append(Example(tokens, labels))
    return out
