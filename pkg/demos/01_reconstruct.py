"""Simulate one visiting slot and rebuild trajectories three ways.

Run: python demos/01_reconstruct.py
"""

import numpy as np

from roomtrace import neuralnet
from roomtrace.ingestion import align_ground_truth, bin_sightings
from roomtrace.museum import default_graph
from roomtrace.reconstruction import (
    SmoothingWindow,
    argmax_reconstruct,
    labeled_windows,
    ma_reconstruct,
    nn_reconstruct,
)
from roomtrace.simulator import default_policy, simulate_visits

g = default_graph()
print(f"{g.n_rooms} rooms, {g.n_receivers} receivers")

# 30 visitors with jitter, fading and dropped packets
sim = simulate_visits(g, default_policy(g), 30, seed=1)
print(f"{len(sim.table)} sightings")

# one receiver x bin matrix per beacon, labels on the same bins
mats = bin_sightings(sim.table, g)
pairs = [(R, align_ground_truth(sim.truth_for(R.beacon).events(), R)) for R in mats]
train, test = pairs[:18], pairs[18:]
R, truth = test[0]
print(f"beacon {R.beacon}: {R.n} x {R.m} matrix, {int((R.coverage > 0).sum())} filled cells")

win = SmoothingWindow(6, 6)
data = labeled_windows(train, win)
pick = np.random.default_rng(1).choice(len(data), 5500, replace=False)
data = neuralnet.LabeledSet(data.inputs[pick], data.targets[pick])
# a short run; the full protocol uses 20000 steps
model = neuralnet.train(data, neuralnet.TrainConfig(iterations=2000, hidden=32, seed=1), n_outputs=g.n_rooms)
print(f"training loss {model.meta['loss_history'][0][1]:.3f} -> {model.meta['loss_history'][-1][1]:.3f}")

labels = np.concatenate([gt.rooms for _, gt in test])
for name, fn in [
    ("AM", lambda R: argmax_reconstruct(R, g)),
    ("MA", lambda R: ma_reconstruct(R, win, g)),
    ("NN", lambda R: nn_reconstruct(R, model, win, g)),
]:
    rooms = np.concatenate([fn(R).rooms for R, _ in test])
    print(f"{name} accuracy {np.mean(rooms == labels):.3f}")

# the first few stays of one visitor, as (room, minutes)
tr = nn_reconstruct(R, model, win, g)
for room, a, b in tr.segments()[:8]:
    print(f"  {g.rooms[room].name:<28} {(b - a) / 60000:5.1f} min")
