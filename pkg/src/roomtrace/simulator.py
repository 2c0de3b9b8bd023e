"""Synthetic museum visits and the RSSI logs they would produce.

Walkers move on the door graph with lognormal dwell times quantized to whole
bins. Each occupied interior room makes its own receivers hear the beacon at
``base_rssi`` and receivers of door-adjacent rooms at ``neighbor_rssi``; both
get per-bin fading, per-sample jitter and random dropout. Randomness for
visitor ``i`` comes from ``(seed, stream, i)`` seed sequences, so visitors are
independent of each other and of the population size.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .ingestion import DEFAULT_DT, GroundTruth, Sighting, SightingTable
from .museum import MuseumGraph, shortest_path

# Average time of visit and its std in minutes per visit type (Borghese survey)
VISIT_MINUTES = {"Normal": (88.0, 26.0), "Audioguide": (103.0, 16.0), "Guide": (105.0, 12.0)}
VISIT_SHARES = {"Normal": 819 / 900, "Audioguide": 57 / 900, "Guide": 24 / 900}


@dataclass(frozen=True)
class NoiseModel:
    base_rssi: float = -55.0
    neighbor_rssi: float = -80.0
    jitter_sd: float = 6.0
    dropout_p: float = 0.2
    sample_period: float = 2.0
    fading_sd: float = 20.0  # per receiver, per bin
    stray_p: float = 0.05  # chance per pre-entry bin of one weak random sighting
    stray_rssi: float = -92.0
    floor: float = -100.0

    def __post_init__(self):
        if not self.base_rssi > self.neighbor_rssi > self.floor:
            raise ValueError("need base_rssi > neighbor_rssi > floor")
        if not 0 <= self.dropout_p <= 1:
            raise ValueError("dropout_p must be in [0, 1]")
        if self.sample_period <= 0:
            raise ValueError("sample_period must be positive")
        if min(self.jitter_sd, self.fading_sd) < 0 or not 0 <= self.stray_p <= 1:
            raise ValueError("noise scales must be nonnegative")

    @classmethod
    def zero(cls, **kw) -> NoiseModel:
        """No jitter, fading, dropout or stray sightings."""
        return cls(**{"jitter_sd": 0.0, "dropout_p": 0.0, "fading_sd": 0.0, "stray_p": 0.0, **kw})


@dataclass
class WalkerPolicy:
    """How simulated visitors move.

    ``next_weights[a, b]`` weighs moving from room ``a`` to door-neighbor ``b``.
    With ``homing`` the walker heads back to the entrance by the shortest path
    once its planned visit time is used up and then leaves; without it the
    walk is a plain Markov chain that ends when it steps outside.
    """

    next_weights: np.ndarray
    dwell_median: np.ndarray  # seconds, per room
    dwell_sigma: float = 0.6
    pace_sigma: float = 0.3  # spread of a per-visitor factor on all dwell times
    visit_minutes: dict = field(default_factory=lambda: dict(VISIT_MINUTES))
    visit_shares: dict = field(default_factory=lambda: dict(VISIT_SHARES))
    homing: bool = True
    entry_spread: float = 300.0  # seconds
    slot_seconds: float = 7200.0
    route: list | None = None
    route_dwell_bins: list | None = None
    group_size: int = 1
    n_groups: int = 0
    group_lag: int = 1  # bins between consecutive group members

    def __post_init__(self):
        w = np.asarray(self.next_weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or np.any(w < 0):
            raise ValueError("next_weights must be a square nonnegative table")
        self.next_weights = w
        self.dwell_median = np.asarray(self.dwell_median, dtype=float)
        if np.any(self.dwell_median <= 0) or self.dwell_sigma < 0 or self.pace_sigma < 0:
            raise ValueError("dwell times must be positive")
        if self.group_size < 1 or self.n_groups < 0 or self.group_lag < 0:
            raise ValueError("bad group settings")


def default_policy(g: MuseumGraph, **overrides) -> WalkerPolicy:
    """Counterclockwise-leaning walk with the surveyed visit lengths."""
    K = g.n_rooms
    w = np.zeros((K, K))
    for d in g.doors:
        if g.rooms[d.a].outside or g.rooms[d.b].outside:
            continue
        w[d.a, d.b] = {"ccw": 2.0, "cw": 1.0, "neutral": 1.0}[d.orientation]
    median = np.full(K, 240.0)
    for r in g.rooms:
        if r.entrance:
            median[r.index] = 180.0
        elif g.receivers.count(r.index) >= 3:
            # aggregated multi-receiver areas (the second floor) hold people longer
            median[r.index] = 900.0
    return WalkerPolicy(w, median, **overrides)


def markov_policy(g: MuseumGraph, exit_weight: float = 0.5, seed: int = 0, **overrides) -> WalkerPolicy:
    """Random fixed transition table over door-neighbors; exits only by chance."""
    rng = np.random.default_rng(seed)
    K = g.n_rooms
    w = np.zeros((K, K))
    for d in g.doors:
        if not g.rooms[d.a].outside and not g.rooms[d.b].outside:
            w[d.a, d.b] = rng.uniform(0.5, 2.0)
    w[g.entrance, g.outside] = exit_weight
    return WalkerPolicy(w, np.full(K, 120.0), homing=False, **overrides)


def transition_probabilities(policy: WalkerPolicy, g: MuseumGraph) -> np.ndarray:
    """Row-normalized ``next_weights`` (the embedded jump chain of a non-homing walk)."""
    w = policy.next_weights.copy()
    w[g.outside] = 0.0
    w[g.outside, g.entrance] = 1.0
    sums = w.sum(axis=1, keepdims=True)
    return np.divide(w, sums, out=np.zeros_like(w), where=sums > 0)


@dataclass
class Simulation:
    truths: list[GroundTruth]
    table: SightingTable
    slot_start: int
    dt: float
    group_of: dict = field(default_factory=dict)  # beacon -> group index

    @property
    def sightings(self) -> list[Sighting]:
        return self.table.to_sightings()

    def truth_for(self, beacon: str) -> GroundTruth:
        return self._by_beacon()[beacon]

    def _by_beacon(self) -> dict:
        return {gt.beacon: gt for gt in self.truths}

    def groups(self) -> list[list[str]]:
        out: dict[int, list[str]] = {}
        for b, k in self.group_of.items():
            out.setdefault(k, []).append(b)
        return [sorted(v) for _, v in sorted(out.items())]


def _rng(seed: int, stream: int, i: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream, i])


def _dwell_bins(policy: WalkerPolicy, room: int, dt: float, rng, pace: float = 1.0) -> int:
    sec = pace * policy.dwell_median[room] * np.exp(policy.dwell_sigma * rng.standard_normal())
    return max(1, int(round(sec / dt)))


def _walk(g: MuseumGraph, policy: WalkerPolicy, n_slot: int, dt: float, rng) -> tuple[np.ndarray, str]:
    """Room per slot bin for one visitor, and its visit type."""
    out = np.full(n_slot, g.outside, dtype=int)
    types = list(policy.visit_shares)
    vt = types[rng.choice(len(types), p=np.array([policy.visit_shares[t] for t in types]))]
    start = int(rng.uniform(0, policy.entry_spread) // dt)
    if policy.route is not None:
        seq = scripted_route(g, policy.route, policy.route_dwell_bins).rooms
        end = min(n_slot, start + len(seq))
        out[start:end] = seq[: end - start]
        return out, vt

    mean, sd = policy.visit_minutes[vt]
    pace = float(np.exp(policy.pace_sigma * rng.standard_normal()))
    minutes = np.clip(rng.normal(mean, sd), 10.0, policy.slot_seconds / 60.0 - 15.0)
    budget = int(minutes * 60 / dt)
    t = start
    room = g.entrance
    homeward: list[int] = []
    while t < n_slot:
        stay = _dwell_bins(policy, room, dt, rng, pace)
        out[t : t + stay] = room
        t += stay
        if policy.homing and not homeward and t - start >= budget:
            homeward = shortest_path(g, room, g.entrance)[1:] + [g.outside]
        if homeward:
            room = homeward.pop(0)
        else:
            w = policy.next_weights[room].copy()
            if policy.homing:
                w[g.outside] = 0.0
            if w.sum() <= 0:
                raise ValueError(f"room {room} has no admissible next room")
            room = int(rng.choice(len(w), p=w / w.sum()))
        if room == g.outside:
            break
    return out, vt


def _emit(
    rooms: np.ndarray,
    g: MuseumGraph,
    noise: NoiseModel,
    slot_start: int,
    dt: float,
    rng,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Receiver, rssi and timestamp arrays for one visitor's room sequence."""
    step = int(round(dt * 1000))
    period = int(round(noise.sample_period * 1000))
    n_rec = g.n_receivers
    rec_room = g.receiver_rooms()
    adj = g.adjacency_matrix()
    # level[r_room, receiver]: expected dBm, nan when the receiver cannot hear that room
    level = np.full((g.n_rooms, n_rec), np.nan)
    for r in g.interior:
        level[r, adj[r, rec_room]] = noise.neighbor_rssi
        level[r, rec_room == r] = noise.base_rssi

    m = len(rooms)
    phase = int(rng.integers(0, period))
    offsets = np.arange(phase, step, period)
    fading = rng.normal(0.0, noise.fading_sd, size=(m, n_rec)) if noise.fading_sd > 0 else np.zeros((m, n_rec))

    bins, recs = np.nonzero(~np.isnan(level[rooms]))
    k = len(offsets)
    bins = np.repeat(bins, k)
    recs = np.repeat(recs, k)
    offs = np.tile(offsets, len(bins) // k if k else 0)
    rssi = level[rooms[bins], recs] + fading[bins, recs]
    if noise.jitter_sd > 0:
        rssi = rssi + rng.normal(0.0, noise.jitter_sd, size=len(rssi))
    keep = rng.random(len(rssi)) >= noise.dropout_p if noise.dropout_p > 0 else np.ones(len(rssi), bool)
    ts = slot_start + bins * step + offs

    # beacons waiting at the desk before entry are picked up now and then;
    # returned beacons are switched off
    inside = np.flatnonzero(rooms != g.outside)
    first_in = inside[0] if len(inside) else m
    outside_bins = np.arange(first_in)
    if noise.stray_p > 0 and len(outside_bins):
        hit = outside_bins[rng.random(len(outside_bins)) < noise.stray_p]
        s_rec = rng.integers(0, n_rec, size=len(hit))
        s_rssi = noise.stray_rssi + rng.normal(0.0, noise.jitter_sd, size=len(hit))
        s_ts = slot_start + hit * step + rng.integers(0, step, size=len(hit))
        return (
            np.concatenate([recs[keep], s_rec]),
            np.concatenate([rssi[keep], s_rssi]),
            np.concatenate([ts[keep], s_ts]),
        )
    return recs[keep], rssi[keep], ts[keep]


def simulate_visits(
    g: MuseumGraph,
    policy: WalkerPolicy,
    n_visitors: int,
    seed: int = 0,
    noise: NoiseModel | None = None,
    dt: float = DEFAULT_DT,
    slot_start: int = 1_561_968_000_000,
) -> Simulation:
    """Simulate one visiting slot.

    Ground truth comes back on the slot grid (bin 0 = ``slot_start``), one
    entry per visitor; the sighting table is sorted by time then beacon.
    Group members copy their leader's walk delayed by ``group_lag`` bins per
    position in the group.
    """
    noise = noise or NoiseModel()
    step = int(round(dt * 1000))
    if slot_start % step:
        raise ValueError("slot_start must fall on a bin boundary")
    n_slot = int(round(policy.slot_seconds / dt))
    width = max(4, len(str(n_visitors - 1)))
    truths, group_of = [], {}
    cols = ([], [], [], [])
    leader_walk = None
    for i in range(n_visitors):
        beacon = f"b{i:0{width}d}"
        in_group = i < policy.n_groups * policy.group_size and policy.group_size > 1
        pos = i % policy.group_size if in_group else 0
        if in_group and pos > 0:
            rooms0, vt = leader_walk
            lag = pos * policy.group_lag
            rooms = np.concatenate([np.full(lag, g.outside), rooms0[: n_slot - lag]])
        else:
            rooms, vt = _walk(g, policy, n_slot, dt, _rng(seed, 0, i))
            leader_walk = (rooms, vt)
        if in_group:
            group_of[beacon] = i // policy.group_size
        truths.append(GroundTruth(beacon, rooms, vt, slot_start, dt))
        rec, rssi, ts = _emit(rooms, g, noise, slot_start, dt, _rng(seed, 1, i))
        cols[0].append(np.full(len(ts), beacon))
        cols[1].append(rec)
        cols[2].append(rssi)
        cols[3].append(ts)
    if n_visitors:
        beacon, rec, rssi, ts = (np.concatenate(c) for c in cols)
        beacon = beacon.astype(str)
    else:
        beacon, rec, rssi, ts = np.array([], dtype=str), np.array([], int), np.array([]), np.array([], np.int64)
    order = np.lexsort((rec, beacon, ts))
    table = SightingTable(beacon[order], rec[order].astype(int), rssi[order], ts[order].astype(np.int64))
    return Simulation(truths, table, slot_start, dt, group_of)


def scripted_route(g: MuseumGraph, rooms: list, dwell_bins: list | int | None = None, dt: float = DEFAULT_DT) -> GroundTruth:
    """Expand a room route into per-bin labels.

    Rooms may be given by index or name; ``dwell_bins`` is one count per room
    (or a single count for all, default 1).
    """
    idx = [g.room_index(r) if isinstance(r, str) else int(r) for r in rooms]
    if dwell_bins is None:
        dwell_bins = 1
    if isinstance(dwell_bins, int):
        dwell_bins = [dwell_bins] * len(idx)
    if len(dwell_bins) != len(idx):
        raise ValueError("one dwell count per room required")
    for a, b in zip(idx, idx[1:]):
        if not g.adjacent(a, b):
            raise ValueError(f"rooms {g.rooms[a].name!r} and {g.rooms[b].name!r} share no door")
    if any(d < 1 for d in dwell_bins):
        raise ValueError("dwell counts must be positive")
    seq = np.repeat(np.array(idx, dtype=int), dwell_bins)
    return GroundTruth("route", seq, "Normal", 0, dt)


def with_noise(noise: NoiseModel, **changes) -> NoiseModel:
    return replace(noise, **changes)
