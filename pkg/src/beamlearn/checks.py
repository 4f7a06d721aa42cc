"""Verification suite: property sweeps and oracle cross-checks.

Each check returns a :class:`CheckResult`; the loss under test can be
swapped in so that deliberately broken variants can be shown to fail.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

import numpy as np

from .beam_search import beam_search
from .losses import LOSSES, NeighborScoring, cost_sensitive_margin_last, upper_bound
from .oracles import (
    brute_force_best_terminal,
    brute_force_policy_cost,
    expectation_shift_check,
    nonconvexity_witnesses,
    random_tree_space,
    realized_transition_cost,
)
from .search_space import optimal_completion_cost

__all__ = [
    "CheckResult",
    "check_upper_bound",
    "check_witnesses",
    "check_expectation_shift",
    "check_oracle_equivalence",
    "check_gradients",
    "finite_difference_check",
    "run_all",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_upper_bound(n_random: int = 10_000, max_n_exhaustive: int = 6, seed: int = 0, loss=upper_bound) -> CheckResult:
    """``loss`` dominates the realized transition cost on random instances
    and on every score ordering of small instances."""
    rng = np.random.default_rng(seed)
    checked = 0

    def violated(s, c, k):
        nonlocal checked
        checked += 1
        bound = loss(NeighborScoring(s, c, k)).value
        real = realized_transition_cost(list(s), list(c), k)
        return bound < real

    for _ in range(n_random):
        n = int(rng.integers(1, 9))
        k = int(rng.integers(1, 5))
        c = rng.integers(0, 5, size=n).astype(float)
        # integer scores produce ties, continuous ones generic positions
        s = rng.integers(-3, 4, size=n).astype(float) if rng.random() < 0.5 else rng.normal(size=n) * 3
        if violated(s, c, k):
            return CheckResult("upper_bound", False, f"violation at s={s.tolist()} c={c.tolist()} k={k}")
    for n in range(1, max_n_exhaustive + 1):
        costs = [rng.integers(0, 4, size=n).astype(float) for _ in range(6)]
        costs.append(np.arange(n, dtype=float))
        for c in costs:
            for perm in itertools.permutations(range(n)):
                s = np.array(perm, dtype=float)
                for k in range(1, 4):
                    if violated(s, c, k):
                        return CheckResult(
                            "upper_bound", False, f"violation at s={s.tolist()} c={c.tolist()} k={k}"
                        )
    return CheckResult("upper_bound", True, f"{checked} instances, no violation")


@_timed
def check_witnesses() -> CheckResult:
    """Both non-convexity witnesses, and agreement of the library loss with
    the reference on the first one."""
    rep = nonconvexity_witnesses()
    c = np.array([0.0, 1.0, 1.0])
    lib = []
    for s, inc in zip(([1.0, 10.0, 0.0], [1.0, 0.0, 10.0], [1.0, 5.0, 5.0]), rep.cond_increase):
        v = cost_sensitive_margin_last(NeighborScoring(np.array(s), c, 2)).value
        lib.append(v if inc else 0.0)
    agree = tuple(lib) == rep.cond_loss
    ok = rep.ok and agree and rep.cond_increase == (False, False, True)
    return CheckResult(
        "witnesses", ok,
        f"conditional {rep.cond_loss}, library {tuple(lib)}, kth hinge {rep.hinge}",
    )


@_timed
def check_expectation_shift(n: int = 10_000, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    for _ in range(n):
        size = int(rng.integers(1, 9))
        d = rng.dirichlet(np.ones(size))
        d2 = rng.dirichlet(np.ones(size))
        a = float(rng.normal())
        r = float(rng.exponential())
        f = a + r * rng.random(size)
        if not expectation_shift_check(d, d2, f, a, r):
            return CheckResult("expectation_shift", False, f"fails at d={d}, d2={d2}, f={f}, r={r}")
    return CheckResult("expectation_shift", True, f"{n} random triples")


@_timed
def check_oracle_equivalence(n_spaces: int = 100, widths=(1, 2, 3, 4, 8), seed: int = 0) -> CheckResult:
    """Beam search against step-by-step simulation, and the completion
    cost table against exhaustive search."""
    rng = np.random.default_rng(seed)
    for i in range(n_spaces):
        space = random_tree_space(seed * 1_000_003 + i)
        table = optimal_completion_cost(space)
        node, cost = brute_force_best_terminal(space)
        if table[space.initial] != cost:
            return CheckResult("oracle_equivalence", False, f"space {i}: c* {table[space.initial]} != {cost}")
        # integer scores so ties are exercised
        node_scores = rng.integers(0, 3, size=space.n_nodes).astype(float)

        def scorer(nodes, _s=node_scores):
            return _s[np.asarray(nodes, dtype=np.int64)]

        for k in widths:
            got = space.terminal_cost(beam_search(space, k, scorer))
            want = brute_force_policy_cost(space, k, scorer)
            if got != want:
                return CheckResult("oracle_equivalence", False, f"space {i}, k={k}: {got} != {want}")
    return CheckResult("oracle_equivalence", True, f"{n_spaces} spaces x {len(widths)} widths")


def finite_difference_check(loss, ns: NeighborScoring, eps: float = 1e-4):
    """Largest relative error ``|fd - g| / max(1, |g|)`` of the analytic
    gradient against central differences, or ``None`` if ``ns`` sits within
    ``eps`` of a kink (one-sided differences disagree)."""
    g = loss(ns).grad_scores
    f0 = loss(ns).value
    worst = 0.0
    for i in range(ns.n):
        e = np.zeros(ns.n)
        e[i] = eps
        fp = loss(ns.with_scores(ns.scores + e)).value
        fm = loss(ns.with_scores(ns.scores - e)).value
        if abs((fp - f0) - (f0 - fm)) / eps > 1e-2:
            return None
        fd = (fp - fm) / (2 * eps)
        worst = max(worst, abs(fd - g[i]) / max(1.0, abs(g[i])))
    return worst


@_timed
def check_gradients(points: int = 100, seed: int = 0, tol: float = 1e-5, losses=None) -> CheckResult:
    rng = np.random.default_rng(seed)
    losses = LOSSES if losses is None else losses
    worst_all = 0.0
    for name, fn in losses.items():
        done = tries = 0
        while done < points:
            tries += 1
            if tries > 50 * points:
                return CheckResult("gradients", False, f"{name}: could not find smooth points")
            n = int(rng.integers(2, 9))
            ns = NeighborScoring(rng.normal(size=n) * 2, rng.integers(0, 5, size=n).astype(float), int(rng.integers(1, 5)))
            err = finite_difference_check(fn, ns)
            if err is None:
                continue
            done += 1
            worst_all = max(worst_all, err)
            if err > tol:
                return CheckResult("gradients", False, f"{name}: relative error {err:.3g} at {ns}")
    return CheckResult("gradients", True, f"{len(losses)} losses x {points} points, worst {worst_all:.2e}")


def run_all(quick: bool = False) -> list[CheckResult]:
    scale = 10 if quick else 1
    return [
        check_upper_bound(n_random=10_000 // scale, max_n_exhaustive=5 if quick else 6),
        check_witnesses(),
        check_expectation_shift(n=10_000 // scale),
        check_oracle_equivalence(n_spaces=100 // scale),
        check_gradients(points=100 // scale),
    ]
