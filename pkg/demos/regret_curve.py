"""
Online regret on a separable tagging task
=========================================

Train with the continue strategy and the convex upper-bound loss, then
compare the online average loss with the best fixed parameters in
hindsight on the very same stored inputs.
"""

import numpy as np

from beamlearn.config import RunConfig
from beamlearn.diagnostics import azuma_eta, empirical_regret, loss_bound_u
from beamlearn.learner import learn, make_datasets
from beamlearn.tasks import hamming_space

cfg = RunConfig(m=800, valid_fraction=0.0, valid_every=0, loss="upper_bound", strategy="continue", k=2)
res = learn(*make_datasets(cfg), cfg)
tr = res.tracker

# the comparator is an exact LP for this loss, so the numbers are certified
for m in (25, 50, 100, 200, 400, 800):
    rep = empirical_regret(tr, cfg.loss, cfg.feature_dim, upto=m)
    print(f"m={m:4d}  online mean {rep.online_mean:7.4f}  best fixed {rep.epsilon_hat:.4f}  gamma_hat {rep.gamma_hat:.4f}")

# how often a learned step still dropped the best completion
incs = np.asarray(tr.cost_increases) > 0
print("rounds with a cost increase: first 100", incs[:100].sum(), "| last 100", incs[-100:].sum())

# the concentration term shrinks like 1/sqrt(m); u bounds the summed loss
# of one trajectory, here for scores no larger than this run produced
space, _ = hamming_space(make_datasets(cfg)[0][0], cfg.num_labels)
u = loss_bound_u(space, cfg.loss, cfg.k, score_clip=tr.max_abs_score)
print(f"largest |score| {tr.max_abs_score:.2f}, u {u:.1f}, eta at delta=0.1 {azuma_eta(u, 0.1, tr.rounds):.2f}")
