"""Sighting-log parsing and resampling into per-beacon receiver x time matrices."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, TextIO

import numpy as np

from .museum import MuseumGraph

DEFAULT_DT = 10.0
DEFAULT_FLOOR = -100.0

VISIT_TYPES = ("Normal", "Audioguide", "Guide")


class LogFormatError(ValueError):
    """A malformed record in a sighting log or label file."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Sighting:
    beacon: str
    receiver: int
    rssi: float
    timestamp: int  # epoch ms


@dataclass
class SightingTable:
    """Columnar sighting log, one entry per row."""

    beacon: np.ndarray  # str
    receiver: np.ndarray
    rssi: np.ndarray
    ts: np.ndarray

    def __len__(self) -> int:
        return len(self.ts)

    @classmethod
    def from_sightings(cls, sightings: Iterable[Sighting]) -> SightingTable:
        sightings = list(sightings)
        return cls(
            np.array([s.beacon for s in sightings], dtype=str),
            np.array([s.receiver for s in sightings], dtype=np.int64),
            np.array([s.rssi for s in sightings], dtype=float),
            np.array([s.timestamp for s in sightings], dtype=np.int64),
        )

    def to_sightings(self) -> list[Sighting]:
        return [
            Sighting(str(b), int(r), float(s), int(t))
            for b, r, s, t in zip(self.beacon.tolist(), self.receiver.tolist(), self.rssi.tolist(), self.ts.tolist())
        ]


@dataclass
class RssiMatrix:
    """Binned signal strengths for one beacon.

    ``values[r, t]`` is the mean dBm seen by receiver ``r`` in bin ``t`` or
    ``floor`` when ``coverage[r, t] == 0``.
    """

    beacon: str
    t0: int
    dt: float
    values: np.ndarray
    coverage: np.ndarray
    floor: float = DEFAULT_FLOOR

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def bin_start(self, t) -> np.ndarray:
        return self.t0 + np.asarray(t) * int(round(self.dt * 1000))

    def with_values(self, values: np.ndarray) -> RssiMatrix:
        return RssiMatrix(self.beacon, self.t0, self.dt, values, self.coverage, self.floor)


@dataclass
class GroundTruth:
    beacon: str
    rooms: np.ndarray
    visit_type: str = "Normal"
    t0: int = 0
    dt: float = DEFAULT_DT

    @property
    def m(self) -> int:
        return len(self.rooms)

    def events(self) -> list[tuple[int, int]]:
        """Run-length change points as ``(timestamp_ms, room)`` pairs."""
        step = int(round(self.dt * 1000))
        out = []
        prev = None
        for t, r in enumerate(self.rooms):
            if r != prev:
                out.append((self.t0 + t * step, int(r)))
                prev = r
        return out


def parse_log(stream: Iterable[str] | TextIO, n_receivers: int | None = None) -> list[Sighting]:
    """Read line-delimited JSON sighting records.

    Each non-blank line must be an object with ``beacon`` (str), ``receiver``
    (int), ``rssi`` (number) and ``ts`` (int, epoch ms). When ``n_receivers``
    is given, receiver ids outside ``[0, n_receivers)`` are rejected.
    """
    out = []
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LogFormatError(lineno, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise LogFormatError(lineno, "record is not an object")
        try:
            beacon = rec["beacon"]
            receiver = rec["receiver"]
            rssi = rec["rssi"]
            ts = rec["ts"]
        except KeyError as exc:
            raise LogFormatError(lineno, f"missing field {exc}") from None
        if not isinstance(beacon, str):
            raise LogFormatError(lineno, "beacon must be a string")
        if isinstance(receiver, bool) or not isinstance(receiver, int):
            raise LogFormatError(lineno, f"receiver must be an integer, got {receiver!r}")
        if isinstance(rssi, bool) or not isinstance(rssi, (int, float)) or not np.isfinite(rssi):
            raise LogFormatError(lineno, f"rssi must be a finite number, got {rssi!r}")
        if isinstance(ts, bool) or not isinstance(ts, int) or ts < 0:
            raise LogFormatError(lineno, f"ts must be a nonnegative integer, got {ts!r}")
        if n_receivers is not None and not 0 <= receiver < n_receivers:
            raise LogFormatError(lineno, f"unknown receiver {receiver}")
        out.append(Sighting(beacon, receiver, float(rssi), ts))
    return out


def format_log(sightings: Iterable[Sighting]) -> str:
    return "".join(
        json.dumps({"beacon": s.beacon, "receiver": s.receiver, "rssi": s.rssi, "ts": s.timestamp}) + "\n"
        for s in sightings
    )


def bin_sightings(
    sightings: Iterable[Sighting] | SightingTable,
    g: MuseumGraph,
    dt: float = DEFAULT_DT,
    floor: float = DEFAULT_FLOOR,
) -> list[RssiMatrix]:
    """Resample sightings into one ``n x m`` matrix per beacon.

    Bin 0 starts at the beacon's first timestamp truncated to a multiple of
    ``dt``; the last bin holds the last sighting. Cells average the dBm values
    that fall into them. Matrices come back sorted by beacon id.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    step = int(round(dt * 1000))
    if step <= 0:
        raise ValueError(f"dt too small: {dt}")
    table = sightings if isinstance(sightings, SightingTable) else SightingTable.from_sightings(sightings)
    if len(table) == 0:
        return []
    n = g.n_receivers
    if table.receiver.min() < 0 or table.receiver.max() >= n:
        raise ValueError("receiver id out of range for graph")

    beacons, which = np.unique(table.beacon, return_inverse=True)
    # one sort makes the summation order independent of the input order
    order = np.lexsort((table.rssi, table.ts, table.receiver, which))
    which, rec, ts, rssi = which[order], table.receiver[order], table.ts[order], table.rssi[order]
    bounds = np.searchsorted(which, np.arange(len(beacons) + 1))

    out = []
    for k, beacon in enumerate(beacons.tolist()):
        sl = slice(bounds[k], bounds[k + 1])
        b_ts, b_rec = ts[sl], rec[sl]
        t0 = int(b_ts.min() // step * step)
        col = (b_ts - t0) // step
        m = int(col.max()) + 1
        sums = np.zeros((n, m))
        counts = np.zeros((n, m), dtype=np.int64)
        np.add.at(sums, (b_rec, col), rssi[sl])
        np.add.at(counts, (b_rec, col), 1)
        values = np.full((n, m), float(floor))
        hit = counts > 0
        values[hit] = sums[hit] / counts[hit]
        out.append(RssiMatrix(beacon, t0, float(dt), values, counts, float(floor)))
    return out


def align_ground_truth(
    events: list[tuple[int, int]],
    matrix: RssiMatrix,
    visit_type: str = "Normal",
) -> GroundTruth:
    """Per-bin labels: the room of the latest event at or before each bin start.

    ``matrix`` may be any binned object with ``beacon``, ``t0``, ``dt`` and
    ``m`` (a reconstructed trajectory works too).
    """
    if not events:
        raise ValueError("no ground-truth events")
    ts = np.array([e[0] for e in events], dtype=np.int64)
    rooms = np.array([e[1] for e in events], dtype=int)
    if np.any(np.diff(ts) < 0):
        raise ValueError("ground-truth events must be time-sorted")
    if ts[0] > matrix.t0:
        raise ValueError(f"first label at {ts[0]} is after bin 0 start {matrix.t0}")
    starts = matrix.t0 + np.arange(matrix.m) * int(round(matrix.dt * 1000))
    idx = np.searchsorted(ts, starts, side="right") - 1
    return GroundTruth(matrix.beacon, rooms[idx], visit_type, matrix.t0, matrix.dt)


@dataclass
class LabelSet:
    """Parsed ground-truth label file: time-sorted events per beacon."""

    events: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    visit_types: dict[str, str] = field(default_factory=dict)


def parse_labels(stream: Iterable[str] | TextIO, g: MuseumGraph) -> LabelSet:
    """Read line-delimited JSON labels: ``beacon``, ``ts``, ``room`` [, ``visit_type``].

    ``room`` is a room name or index.
    """
    labels = LabelSet()
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            beacon, ts, room = rec["beacon"], rec["ts"], rec["room"]
        except json.JSONDecodeError as exc:
            raise LogFormatError(lineno, f"invalid JSON ({exc.msg})") from None
        except (KeyError, TypeError) as exc:
            raise LogFormatError(lineno, f"missing field {exc}") from None
        if isinstance(ts, bool) or not isinstance(ts, int):
            raise LogFormatError(lineno, f"ts must be an integer, got {ts!r}")
        if isinstance(room, str):
            try:
                room = g.room_index(room)
            except KeyError:
                raise LogFormatError(lineno, f"unknown room {room!r}") from None
        elif isinstance(room, bool) or not isinstance(room, int) or not 0 <= room < g.n_rooms:
            raise LogFormatError(lineno, f"unknown room {room!r}")
        vt = rec.get("visit_type")
        if vt is not None:
            if vt not in VISIT_TYPES:
                raise LogFormatError(lineno, f"unknown visit_type {vt!r}")
            labels.visit_types[beacon] = vt
        labels.events.setdefault(beacon, []).append((ts, room))
    for evs in labels.events.values():
        evs.sort(key=lambda e: e[0])
    return labels


def format_labels(truths: Iterable[GroundTruth], g: MuseumGraph) -> str:
    lines = []
    for gt in truths:
        for ts, room in gt.events():
            lines.append(
                json.dumps(
                    {"beacon": gt.beacon, "ts": ts, "room": g.rooms[room].name, "visit_type": gt.visit_type}
                )
            )
    return "".join(line + "\n" for line in lines)
