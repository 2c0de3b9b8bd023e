"""Museum topology: rooms, receivers, doors and the room-pair weight table."""

from __future__ import annotations

import sys
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ORIENTATIONS = {"ccw": 1, "cw": -1, "neutral": 0}
_REVERSED = {"ccw": "cw", "cw": "ccw", "neutral": "neutral"}


class GraphConfigError(ValueError):
    """Raised when a graph config cannot be parsed or violates an invariant."""


@dataclass(frozen=True)
class Room:
    index: int
    name: str
    outside: bool = False
    entrance: bool = False


@dataclass(frozen=True)
class Door:
    a: int
    b: int
    orientation: str  # direction label when walking a -> b


@dataclass(frozen=True)
class MuseumGraph:
    """Immutable museum description.

    ``receivers[r]`` is the room index of receiver ``r``. ``doors`` holds both
    directions of every door, each carrying the orientation seen when walking
    it in that direction.
    """

    rooms: tuple[Room, ...]
    receivers: tuple[int, ...]
    doors: tuple[Door, ...]
    special_weights: tuple[tuple[int, int, complex], ...] = ()
    _neighbors: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        nbrs: dict[int, list[int]] = {r.index: [] for r in self.rooms}
        for d in self.doors:
            nbrs.setdefault(d.a, []).append(d.b)
        object.__setattr__(
            self, "_neighbors", {k: tuple(sorted(set(v))) for k, v in nbrs.items()}
        )

    @property
    def n_rooms(self) -> int:
        return len(self.rooms)

    @property
    def n_receivers(self) -> int:
        return len(self.receivers)

    @property
    def outside(self) -> int:
        return next(r.index for r in self.rooms if r.outside)

    @property
    def entrance(self) -> int:
        return next(r.index for r in self.rooms if r.entrance)

    @property
    def interior(self) -> list[int]:
        return [r.index for r in self.rooms if not r.outside]

    def room_index(self, name: str) -> int:
        for r in self.rooms:
            if r.name == name:
                return r.index
        raise KeyError(f"unknown room {name!r}")

    def neighbors(self, room: int) -> tuple[int, ...]:
        return self._neighbors[room]

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._neighbors[a]

    def orientation(self, a: int, b: int) -> str | None:
        for d in self.doors:
            if d.a == a and d.b == b:
                return d.orientation
        return None

    def receiver_rooms(self) -> np.ndarray:
        return np.asarray(self.receivers, dtype=int)

    def adjacency_matrix(self) -> np.ndarray:
        """Boolean K x K matrix, True on the diagonal and for door-neighbors."""
        adj = np.eye(self.n_rooms, dtype=bool)
        for d in self.doors:
            adj[d.a, d.b] = True
        return adj


def _validate(g: MuseumGraph) -> None:
    idx = [r.index for r in g.rooms]
    if idx != list(range(len(idx))):
        raise GraphConfigError("rooms must be indexed 0..K-1 in order")
    if sum(r.outside for r in g.rooms) != 1:
        raise GraphConfigError("exactly one room must be flagged outside")
    if sum(r.entrance for r in g.rooms) != 1:
        raise GraphConfigError("exactly one room must be flagged entrance")
    if g.rooms[g.entrance].outside:
        raise GraphConfigError("the entrance room cannot be the outside room")
    if not g.receivers:
        raise GraphConfigError("at least one receiver is required")
    for r, room in enumerate(g.receivers):
        if not 0 <= room < len(idx):
            raise GraphConfigError(f"orphan receiver {r}: unknown room {room}")
        if g.rooms[room].outside:
            raise GraphConfigError(f"orphan receiver {r}: mapped to the outside room")

    directed = {}
    for d in g.doors:
        if d.a == d.b:
            raise GraphConfigError(f"self-loop door on room {d.a}")
        if d.orientation not in ORIENTATIONS:
            raise GraphConfigError(f"bad orientation {d.orientation!r}")
        for end in (d.a, d.b):
            if not 0 <= end < len(idx):
                raise GraphConfigError(f"door references unknown room {end}")
        directed[(d.a, d.b)] = d.orientation
    for (a, b), o in directed.items():
        if directed.get((b, a)) != _REVERSED[o]:
            raise GraphConfigError(
                f"asymmetric door: ({a},{b},{o}) has no reverse ({b},{a},{_REVERSED[o]})"
            )

    interior = g.interior
    seen = {interior[0]}
    queue = deque([interior[0]])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in seen and not g.rooms[v].outside:
                seen.add(v)
                queue.append(v)
    if len(seen) != len(interior):
        missing = sorted(set(interior) - seen)
        raise GraphConfigError(f"disconnected interior: rooms {missing} unreachable")

    for a, b, w in g.special_weights:
        if not (0 <= a < len(idx) and 0 <= b < len(idx)):
            raise GraphConfigError(f"special weight references unknown room ({a},{b})")
        if a == b:
            raise GraphConfigError(f"special weight on diagonal ({a},{a})")
        if w.real < 0 or w.imag < 0 or w == 0:
            raise GraphConfigError(f"special weight ({a},{b}) must be nonzero with nonnegative parts")


def _room_ref(value, names: dict[str, int], where: str) -> int:
    if isinstance(value, int):
        return value
    if value in names:
        return names[value]
    raise GraphConfigError(f"{where}: unknown room {value!r}")


def graph_from_dict(cfg: dict) -> MuseumGraph:
    """Build and validate a graph from an already parsed config mapping."""
    try:
        rooms = tuple(
            Room(i, str(r["name"]), bool(r.get("outside", False)), bool(r.get("entrance", False)))
            for i, r in enumerate(cfg["rooms"])
        )
    except (KeyError, TypeError) as exc:
        raise GraphConfigError(f"rooms: malformed entry ({exc})") from None
    names = {r.name: r.index for r in rooms}

    receivers = []
    for i, rec in enumerate(cfg.get("receivers", [])):
        if rec.get("id", i) != i:
            raise GraphConfigError(f"receivers[{i}]: ids must be 0..n-1 in order")
        receivers.append(_room_ref(rec["room"], names, f"receivers[{i}]"))

    doors = []
    for i, d in enumerate(cfg.get("doors", [])):
        try:
            a = _room_ref(d["from"], names, f"doors[{i}]")
            b = _room_ref(d["to"], names, f"doors[{i}]")
        except KeyError as exc:
            raise GraphConfigError(f"doors[{i}]: missing field {exc}") from None
        doors.append(Door(a, b, str(d.get("orientation", "neutral"))))

    special = []
    for i, s in enumerate(cfg.get("special_weights", [])):
        a = _room_ref(s["a"], names, f"special_weights[{i}]")
        b = _room_ref(s["b"], names, f"special_weights[{i}]")
        special.append((a, b, complex(float(s.get("real", 0.0)), float(s.get("imag", 0.0)))))

    g = MuseumGraph(tuple(rooms), tuple(receivers), tuple(doors), tuple(special))
    _validate(g)
    return g


def load_graph(config_text: str) -> MuseumGraph:
    """Parse a TOML graph config and return the validated graph.

    Raises:
        GraphConfigError: on TOML syntax errors (message carries the line
            number) or on any violated graph invariant.
    """
    try:
        cfg = tomllib.loads(config_text)
    except tomllib.TOMLDecodeError as exc:
        raise GraphConfigError(f"parse error: {exc}") from None
    return graph_from_dict(cfg)


def load_graph_file(path: str | Path) -> MuseumGraph:
    return load_graph(Path(path).read_text())


def default_graph() -> MuseumGraph:
    """The bundled Galleria Borghese fixture (10 rooms, 14 receivers)."""
    text = resources.files("roomtrace.data").joinpath("borghese.toml").read_text()
    return load_graph(text)


def _bfs_dist(g: MuseumGraph, src: int) -> dict[int, int]:
    dist = {src: 0}
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in dist and not g.rooms[v].outside:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def shortest_hops(g: MuseumGraph, a: int, b: int) -> int:
    """Minimum number of door crossings between two interior rooms."""
    dist = _bfs_dist(g, a)
    if b not in dist:
        raise GraphConfigError(f"room {b} unreachable from {a}")
    return dist[b]


def shortest_path(g: MuseumGraph, a: int, b: int) -> list[int]:
    """Fewest-hop interior path; ties go to the lexicographically smallest sequence."""
    to_b = _bfs_dist(g, b)
    if a not in to_b:
        raise GraphConfigError(f"room {b} unreachable from {a}")
    path = [a]
    while path[-1] != b:
        here = path[-1]
        path.append(min(v for v in g.neighbors(here) if to_b.get(v) == to_b[here] - 1))
    return path


def build_weight_table(g: MuseumGraph) -> np.ndarray:
    """Complex K x K room-pair weights.

    Interior pairs cost ``1 + 2k`` with ``k`` intermediate rooms on the
    shortest path, then ``special_weights`` overrides are applied. Pairs with
    the outside room cost the interior cost from the entrance plus ``10j``.
    """
    K = g.n_rooms
    out = g.outside
    w = np.zeros((K, K), dtype=complex)
    interior = g.interior
    for a in interior:
        dist = _bfs_dist(g, a)
        for b in interior:
            if b not in dist:
                raise GraphConfigError(f"unreachable room pair ({a},{b})")
            if a != b:
                w[a, b] = 2 * dist[b] - 1

    overridden = set()
    for a, b, val in g.special_weights:
        w[a, b] = w[b, a] = val
        overridden |= {(a, b), (b, a)}

    ent = g.entrance
    for r in interior:
        if (out, r) not in overridden:
            w[out, r] = w[r, out] = complex(w[ent, r].real, 10.0)
    return w
