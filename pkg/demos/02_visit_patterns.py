"""Time spent per room, visit lengths, clockwisety and the most typical path.

Works on simulator ground truth so it runs in a few seconds.
Run: python demos/02_visit_patterns.py
"""

import numpy as np

from roomtrace import analysis
from roomtrace.museum import build_weight_table, default_graph
from roomtrace.reconstruction import Trajectory
from roomtrace.simulator import default_policy, simulate_visits

g = default_graph()
sim = simulate_visits(g, default_policy(g), 200, seed=2)
trajs = [Trajectory(t.beacon, t.t0, t.dt, t.rooms, t.visit_type, "truth") for t in sim.truths]
trajs = analysis.filter_visits(trajs, g)
print(f"{len(trajs)} visits between 25 and 125 minutes")

for vt, (mean, std, n) in analysis.tov_summary(trajs, g).items():
    print(f"{vt:<11} {mean:6.1f} +/- {std:4.1f} min  (n={n})")

perm = analysis.time_of_permanence(trajs, g)
print("\nmean minutes per room, Normal visits")
for r in g.interior:
    print(f"  {g.rooms[r].name:<28} {perm['Normal'][r]:5.1f}")

scores = np.array([analysis.clockwisety(t, g) for t in trajs])
vals, counts = np.unique(scores, return_counts=True)
print("\nclockwisety histogram")
for v, c in zip(vals, counts):
    print(f"  {v:+3d} {'#' * c}")

w = build_weight_table(g)
dm = analysis.distance_matrix([analysis.trim_to_visit(t, g) for t in trajs], w, g.outside)
most, least = analysis.common_paths(dm)
by_id = {t.beacon: t for t in trajs}
for label, b in (("most common", most), ("least common", least)):
    t = by_id[b]
    route = [g.rooms[r].name for r, _, _ in t.segments() if r != g.outside]
    print(f"\n{label}: {b}, clockwisety {analysis.clockwisety(t, g):+d}")
    print("  " + " > ".join(route))
