"""
Why a wider beam helps: the garden path
=======================================

The first token of every sentence is the same, but the right first label
depends on the second token.  A greedy decoder has to commit before it
sees that token.  A beam of width 4 keeps both readings alive.
"""

from beamlearn.config import RunConfig
from beamlearn.learner import build_problem, evaluate, learn, make_datasets
from beamlearn.tasks import garden_path_dataset

test = garden_path_dataset(300, seed=123, length=3)
print("a few examples (tokens -> labels):")
for ex in test[:4]:
    print("  ", ex.tokens, "->", ex.labels)

# same data, same seed, same loss; only the width changes
for k in (1, 4):
    cfg = RunConfig(task="garden_path", length=3, m=300, k=k, loss="upper_bound", strategy="continue")
    res = learn(*make_datasets(cfg), cfg)
    cost = evaluate(build_problem(cfg), test, res.state.best_theta, k)
    print(f"k={k}: mean Hamming cost on held-out sentences {cost:.3f} (selected at round {res.state.best_round})")

# about half the sentences start with the "other" reading, so greedy
# decoding settles near 0.5 no matter how long it trains
