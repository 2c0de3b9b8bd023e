from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roomtrace.museum import (
    GraphConfigError,
    build_weight_table,
    graph_from_dict,
    load_graph,
    shortest_hops,
    shortest_path,
)

from conftest import ring_config


def bfs_hops(adj: dict, a, b):
    """Independent BFS over a plain adjacency dict."""
    seen = {a: 0}
    q = deque([a])
    while q:
        u = q.popleft()
        for v in adj[u]:
            if v not in seen:
                seen[v] = seen[u] + 1
                q.append(v)
    return seen[b]


def test_default_graph_shape(graph):
    assert graph.n_rooms == 10
    assert graph.n_receivers == 14
    assert graph.rooms[graph.outside].name == "Outside"
    assert graph.rooms[graph.entrance].name == "Portico"
    # 10 receivers on the first floor, 4 in the aggregated second floor
    pin = graph.room_index("Pinacoteca")
    assert graph.receivers.count(pin) == 4


def test_minimal_graph():
    text = """
[[rooms]]
name = "A"
entrance = true
[[rooms]]
name = "B"
[[rooms]]
name = "Out"
outside = true
[[receivers]]
room = "A"
[[receivers]]
room = "B"
[[doors]]
from = "A"
to = "B"
orientation = "ccw"
[[doors]]
from = "B"
to = "A"
orientation = "cw"
"""
    g = load_graph(text)
    assert g.n_rooms == 3 and g.n_receivers == 2
    assert g.adjacent(0, 1) and g.adjacent(1, 0)


def test_asymmetric_door_rejected():
    text = ring_config(3).replace('from = 1\nto = 0\norientation = "cw"', 'from = 1\nto = 0\norientation = "ccw"')
    with pytest.raises(GraphConfigError, match="asymmetric"):
        load_graph(text)


def test_missing_reverse_door_rejected():
    cfg = {
        "rooms": [{"name": "A", "entrance": True}, {"name": "B"}, {"name": "O", "outside": True}],
        "receivers": [{"room": "A"}, {"room": "B"}],
        "doors": [{"from": "A", "to": "B", "orientation": "ccw"}],
    }
    with pytest.raises(GraphConfigError, match="asymmetric"):
        graph_from_dict(cfg)


def test_orphan_receiver_and_disconnected_interior():
    base = {
        "rooms": [{"name": "A", "entrance": True}, {"name": "B"}, {"name": "O", "outside": True}],
        "receivers": [{"room": "A"}, {"room": "B"}],
        "doors": [],
    }
    with pytest.raises(GraphConfigError, match="disconnected interior"):
        graph_from_dict(base)
    bad = dict(base, receivers=[{"room": 7}])
    with pytest.raises(GraphConfigError, match="orphan receiver"):
        graph_from_dict(bad)
    with pytest.raises(GraphConfigError, match="unknown room"):
        graph_from_dict(dict(base, receivers=[{"room": "Nowhere"}]))


def test_self_loop_rejected():
    cfg = {
        "rooms": [{"name": "A", "entrance": True}, {"name": "O", "outside": True}],
        "receivers": [{"room": "A"}],
        "doors": [{"from": "A", "to": "A"}],
    }
    with pytest.raises(GraphConfigError, match="self-loop"):
        graph_from_dict(cfg)


def test_parse_error_reports_line():
    with pytest.raises(GraphConfigError, match="line 3"):
        load_graph('[[rooms]]\nname = "A"\nname = = 2\n')


def test_shortest_hops(ring8):
    assert shortest_hops(ring8, 3, 3) == 0
    assert shortest_hops(ring8, 0, 1) == 1
    assert shortest_hops(ring8, 0, 4) == 4
    assert shortest_hops(ring8, 2, 6) == 4


def test_shortest_path_tie_break(ring8):
    # both ways round are 4 hops; the lexicographically smaller one wins
    assert shortest_path(ring8, 0, 4) == [0, 1, 2, 3, 4]
    assert shortest_path(ring8, 4, 0) == [4, 3, 2, 1, 0]


def test_weight_table_values(graph):
    w = build_weight_table(graph)
    portico = graph.entrance
    paolina = graph.room_index("Sala Paolina")
    david = graph.room_index("Sala del David")
    assert w[portico, paolina] == 1
    assert w[portico, portico] == 0
    assert w[portico, david] == 3
    assert w[portico, graph.outside] == 10j
    pin = graph.room_index("Pinacoteca")
    ratto = graph.room_index("Sala degli Imperatori")
    assert w[pin, ratto] == 15
    # 15 plus the cost of reaching the stairs room
    for r in graph.interior:
        if r not in (pin, ratto):
            assert w[pin, r] == 15 + w[ratto, r]
    assert w[pin, graph.outside] == w[portico, pin] + 10j


def test_weight_table_matches_independent_bfs(graph):
    w = build_weight_table(graph)
    adj = {r: [v for v in graph.neighbors(r) if v != graph.outside] for r in graph.interior}
    overridden = {(a, b) for a, b, _ in graph.special_weights} | {(b, a) for a, b, _ in graph.special_weights}
    for a in graph.interior:
        for b in graph.interior:
            if a != b and (a, b) not in overridden:
                assert w[a, b] == 2 * bfs_hops(adj, a, b) - 1


def test_ring_orientation_sums_to_cycle_length(ring8):
    from roomtrace.museum import ORIENTATIONS

    cycle = list(range(8)) + [0]
    total = sum(ORIENTATIONS[ring8.orientation(a, b)] for a, b in zip(cycle, cycle[1:]))
    assert total == 8
    back = cycle[::-1]
    assert sum(ORIENTATIONS[ring8.orientation(a, b)] for a, b in zip(back, back[1:])) == -8


@st.composite
def connected_configs(draw):
    k = draw(st.integers(2, 8))
    # random spanning tree plus extra chords keeps the interior connected
    edges = set()
    for v in range(1, k):
        edges.add((draw(st.integers(0, v - 1)), v))
    for _ in range(draw(st.integers(0, k))):
        a, b = draw(st.integers(0, k - 1)), draw(st.integers(0, k - 1))
        if a != b:
            edges.add((min(a, b), max(a, b)))
    rooms = [{"name": f"R{i}", "entrance": i == 0} for i in range(k)] + [{"name": "Out", "outside": True}]
    doors = []
    for a, b in sorted(edges):
        doors += [{"from": a, "to": b, "orientation": "ccw"}, {"from": b, "to": a, "orientation": "cw"}]
    doors += [{"from": 0, "to": k}, {"from": k, "to": 0}]
    receivers = [{"room": draw(st.integers(0, k - 1))} for _ in range(draw(st.integers(1, 2 * k)))]
    return {"rooms": rooms, "receivers": receivers, "doors": doors}


@settings(max_examples=60, deadline=None)
@given(connected_configs())
def test_weight_table_symmetric_zero_diagonal(cfg):
    g = graph_from_dict(cfg)
    w = build_weight_table(g)
    assert np.array_equal(w, w.T)
    off = ~np.eye(g.n_rooms, dtype=bool)
    assert np.all(np.diag(w) == 0)
    assert np.all(w[off] != 0)
    assert np.all(w.real >= 0) and np.all(w.imag >= 0)
