"""Spot visitors walking together and estimate room-to-room transitions.

Run: python demos/03_groups_and_transitions.py
"""

import numpy as np

from roomtrace import analysis
from roomtrace.museum import build_weight_table, default_graph
from roomtrace.reconstruction import Trajectory
from roomtrace.simulator import NoiseModel, default_policy, markov_policy, simulate_visits, transition_probabilities

g = default_graph()
w = build_weight_table(g)

# four planted pairs, the second member trailing by two bins
policy = default_policy(g, n_groups=4, group_size=2, group_lag=2)
sim = simulate_visits(g, policy, 50, seed=3, noise=NoiseModel.zero())
trajs = [Trajectory(t.beacon, t.t0, t.dt, t.rooms, t.visit_type, "truth") for t in sim.truths]
dm = analysis.distance_matrix(trajs, w, g.outside)
thr = analysis.default_group_threshold(dm)
print(f"median pair distance {np.median(dm.off_diagonal()):.0f}, group threshold {thr:.0f}")
print("planted:", sim.groups())
print("found:  ", analysis.detect_groups(dm, thr))

# a random walker that only leaves by chance; counts converge to its table
policy = markov_policy(g, seed=0, slot_seconds=4 * 7200)
sim = simulate_visits(g, policy, 400, seed=0, noise=NoiseModel.zero())
tm = analysis.transition_matrix(sim.truths, g)
P = transition_probabilities(policy, g)
print(f"\n{int(tm.counts.sum())} transitions, largest error {np.abs(tm.probs - P).max():.3f}")
names = [r.name.split()[-1][:8] for r in g.rooms]
print(" " * 9 + " ".join(f"{n:>8}" for n in names))
for i, n in enumerate(names):
    print(f"{n:>8} " + " ".join(f"{p:8.2f}" for p in tm.probs[i]))
