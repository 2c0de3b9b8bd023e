import numpy as np
import pytest

from roomtrace.ingestion import align_ground_truth, bin_sightings
from roomtrace.reconstruction import accuracy, argmax_reconstruct
from roomtrace.simulator import (
    NoiseModel,
    default_policy,
    markov_policy,
    scripted_route,
    simulate_visits,
    transition_probabilities,
    with_noise,
)


def test_same_seed_same_output(graph):
    pol = default_policy(graph)
    a = simulate_visits(graph, pol, 5, seed=3)
    b = simulate_visits(graph, pol, 5, seed=3)
    c = simulate_visits(graph, pol, 5, seed=4)
    assert np.array_equal(a.table.rssi, b.table.rssi) and np.array_equal(a.table.ts, b.table.ts)
    assert not np.array_equal(a.truths[0].rooms, c.truths[0].rooms)


def test_visitor_streams_are_independent_of_ensemble_size(graph):
    pol = default_policy(graph)
    small = simulate_visits(graph, pol, 3, seed=1)
    large = simulate_visits(graph, pol, 8, seed=1)
    for x, y in zip(small.truths, large.truths):
        assert np.array_equal(x.rooms, y.rooms)


def test_walks_only_use_doors(graph):
    sim = simulate_visits(graph, default_policy(graph), 40, seed=0)
    adj = graph.adjacency_matrix()
    for gt in sim.truths:
        r = gt.rooms
        assert np.all(adj[r[:-1], r[1:]])
        inside = np.flatnonzero(r != graph.outside)
        assert r[inside[0]] == graph.entrance
        assert gt.visit_type in ("Normal", "Audioguide", "Guide")


def test_full_dropout_gives_empty_log(graph):
    sim = simulate_visits(graph, default_policy(graph), 4, seed=0, noise=NoiseModel(dropout_p=1.0, stray_p=0.0))
    assert len(sim.table) == 0


def test_zero_noise_argmax_is_exact(graph):
    sim = simulate_visits(graph, default_policy(graph), 10, seed=2, noise=NoiseModel.zero())
    for R in bin_sightings(sim.table, graph):
        truth = align_ground_truth(sim.truth_for(R.beacon).events(), R)
        assert accuracy(argmax_reconstruct(R, graph), truth) == 1.0


def test_accuracy_falls_as_jitter_grows(graph):
    pol = default_policy(graph)
    accs = []
    for jitter in (0.0, 6.0, 20.0):
        noise = with_noise(NoiseModel.zero(), jitter_sd=jitter)
        sim = simulate_visits(graph, pol, 6, seed=0, noise=noise)
        hits = total = 0
        for R in bin_sightings(sim.table, graph):
            truth = align_ground_truth(sim.truth_for(R.beacon).events(), R)
            hits += accuracy(argmax_reconstruct(R, graph), truth) * R.m
            total += R.m
        accs.append(hits / total)
    assert accs[0] == 1.0 and accs[0] >= accs[1] >= accs[2]
    assert accs[2] < accs[0]


def test_groups_are_lagged_copies(graph):
    pol = default_policy(graph, n_groups=2, group_size=3, group_lag=2)
    sim = simulate_visits(graph, pol, 10, seed=0)
    assert sim.groups() == [["b0000", "b0001", "b0002"], ["b0003", "b0004", "b0005"]]
    lead, second = sim.truths[0].rooms, sim.truths[1].rooms
    assert np.array_equal(second[2:], lead[:-2])


def test_scripted_route(graph):
    gt = scripted_route(graph, ["Portico", 1, 2], [2, 1, 3])
    assert gt.rooms.tolist() == [0, 0, 1, 2, 2, 2]
    with pytest.raises(ValueError, match="share no door"):
        scripted_route(graph, [0, 2])


def test_markov_transition_probabilities_rows(graph):
    pol = markov_policy(graph, seed=1)
    P = transition_probabilities(pol, graph)
    np.testing.assert_allclose(P.sum(axis=1), 1.0)
    adj = graph.adjacency_matrix()
    assert np.all(P[~adj] == 0)
