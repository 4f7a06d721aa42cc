"""
The surrogate losses on one small neighborhood
==============================================

Three candidates with costs 0, 1, 2 and a beam of width 2.  The scorer
likes the worst candidate best, so the cost-0 candidate would be cut.
"""

import numpy as np

from beamlearn.losses import LOSSES, NeighborScoring, get_loss
from beamlearn.oracles import nonconvexity_witnesses, realized_transition_cost

scores = np.array([0.0, 5.0, 4.0])
costs = np.array([0.0, 1.0, 2.0])
x = NeighborScoring(scores, costs, k=2)

# what keeping the two top-scored candidates actually costs
print("realized transition cost:", realized_transition_cost(list(scores), list(costs), 2))

# every loss, with its gradient with respect to the scores
for name in LOSSES:
    r = get_loss(name)(x)
    print(f"{name:20s} value {r.value:8.4f}  d/ds {np.round(r.grad_scores, 4)}")

# upper_bound is the one that always dominates the realized cost
# (tests/test_losses.py checks that on random instances)

# two losses that look innocent are not convex in the scores
w = nonconvexity_witnesses()
print("loss only on a cost increase, at s1, s2, midpoint:", w.cond_loss)
print("k-th place hinge, at s1, s2, midpoint:         ", w.hinge)
