"""Tab-separated text outputs and their readers.

Every table starts with a header line. Floats are written with ``repr`` so
they read back exactly, except report tables, which use fixed decimals.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path

import numpy as np

from .analysis import DistanceMatrix, TransitionMatrix
from .museum import MuseumGraph
from .reconstruction import Trajectory

TRAJECTORY_HEADER = ["beacon", "bin", "ts", "room", "method"]
SEGMENT_HEADER = ["beacon", "room", "enter_ts", "exit_ts", "method"]
DISTANCE_HEADER = ["beacon_a", "beacon_b", "real", "imag", "scalar"]


class TableFormatError(ValueError):
    pass


def tsv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _read(text: str, header: list[str], name: str) -> list[list[str]]:
    rows = list(csv.reader(io.StringIO(text), delimiter="\t"))
    if not rows or rows[0][: len(header)] != header:
        raise TableFormatError(f"{name}: expected header {header}")
    out = rows[1:]
    for i, r in enumerate(out, start=2):
        if len(r) < len(header):
            raise TableFormatError(f"{name} line {i}: expected {len(header)} columns, got {len(r)}")
    return out


def format_trajectories(trajs: list[Trajectory], g: MuseumGraph) -> str:
    """One row per bin: beacon, bin index, bin start (epoch ms), room name, method."""
    rows = []
    for tr in trajs:
        step = int(round(tr.dt * 1000))
        for t, r in enumerate(tr.rooms):
            rows.append([tr.beacon, t, tr.t0 + t * step, g.rooms[r].name, tr.method])
    return tsv(TRAJECTORY_HEADER, rows)


def format_segments(trajs: list[Trajectory], g: MuseumGraph) -> str:
    """Run-length form: beacon, room, enter_ts, exit_ts (end of the last bin), method."""
    rows = []
    for tr in trajs:
        for room, a, b in tr.segments():
            rows.append([tr.beacon, g.rooms[room].name, a, b, tr.method])
    return tsv(SEGMENT_HEADER, rows)


def parse_trajectories(text: str, g: MuseumGraph, name: str = "trajectories") -> list[Trajectory]:
    per: dict[str, list] = defaultdict(list)
    for i, (beacon, t, ts, room, method, *_) in enumerate(_read(text, TRAJECTORY_HEADER, name), start=2):
        try:
            per[beacon].append((int(t), int(ts), g.room_index(room), method))
        except KeyError:
            raise TableFormatError(f"{name} line {i}: unknown room {room!r}") from None
        except ValueError:
            raise TableFormatError(f"{name} line {i}: bad integer field") from None
    out = []
    for beacon, rows in per.items():
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise TableFormatError(f"{name}: beacon {beacon} has missing or repeated bins")
        dt = (rows[1][1] - rows[0][1]) / 1000 if len(rows) > 1 else 10.0
        rooms = np.array([r[2] for r in rows], dtype=int)
        out.append(Trajectory(beacon, rows[0][1], dt, rooms, None, rows[0][3]))
    return out


def read_trajectories(path, g: MuseumGraph) -> list[Trajectory]:
    return parse_trajectories(Path(path).read_text(), g, str(path))


def format_distances(dm: DistanceMatrix) -> str:
    """Upper triangle in long form: both beacons, real and imaginary sums, scalar distance."""
    rows = []
    N = len(dm)
    for i in range(N):
        for j in range(i + 1, N):
            c = dm.complex_d[i, j]
            rows.append([dm.order[i], dm.order[j], repr(float(c.real)), repr(float(c.imag)), repr(float(dm.scalar_d[i, j]))])
    return tsv(DISTANCE_HEADER, rows)


def parse_distances(text: str, name: str = "distances") -> DistanceMatrix:
    rows = _read(text, DISTANCE_HEADER, name)
    order: list[str] = []
    index = {}
    for a, b, *_ in rows:
        for x in (a, b):
            if x not in index:
                index[x] = len(order)
                order.append(x)
    N = len(order)
    cd = np.zeros((N, N), dtype=complex)
    sd = np.zeros((N, N))
    for i, (a, b, re, im, sc, *_) in enumerate(rows, start=2):
        try:
            c = complex(float(re), float(im))
            s = float(sc)
        except ValueError:
            raise TableFormatError(f"{name} line {i}: bad number") from None
        p, q = index[a], index[b]
        cd[p, q] = cd[q, p] = c
        sd[p, q] = sd[q, p] = s
    return DistanceMatrix(order, cd, sd)


def read_distances(path) -> DistanceMatrix:
    return parse_distances(Path(path).read_text(), str(path))


def histogram_series(values, bin_width: float) -> str:
    """Plot-ready histogram: lower edge, upper edge, count."""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return tsv(["bin_lo", "bin_hi", "count"], [])
    k = np.floor(values / bin_width).astype(np.int64)
    counts = np.bincount(k - k.min())
    rows = [
        [f"{(k.min() + i) * bin_width:.6f}", f"{(k.min() + i + 1) * bin_width:.6f}", int(c)]
        for i, c in enumerate(counts)
    ]
    return tsv(["bin_lo", "bin_hi", "count"], rows)


def format_permanence(perm: dict[str, np.ndarray], g: MuseumGraph) -> str:
    """Mean minutes per interior room (rows) and visit type (columns)."""
    types = list(perm)
    rows = [[g.rooms[r].name] + [f"{perm[vt][r]:.3f}" for vt in types] for r in g.interior]
    return tsv(["room"] + [f"{vt}_min" for vt in types], rows)


def format_tov_summary(summary: dict[str, tuple[float, float, int]]) -> str:
    """Time of visit per visit type: mean, std (minutes), count and a ``mean±std`` cell."""
    rows = [[vt, f"{m:.3f}", f"{s:.3f}", n, f"{m:.0f}±{s:.0f}"] for vt, (m, s, n) in summary.items()]
    return tsv(["visit_type", "mean_min", "std_min", "count", "mean±std"], rows)


def format_clockwisety(scores: dict[str, list[int]]) -> str:
    """Share (percent) of trajectories per clockwisety score and visit type."""
    all_scores = sorted({s for v in scores.values() for s in v})
    types = list(scores)
    rows = []
    for s in all_scores:
        row = [s]
        for vt in types:
            v = scores[vt]
            row.append(f"{100.0 * v.count(s) / len(v):.3f}" if v else "0.000")
        rows.append(row)
    return tsv(["clockwisety"] + [f"{vt}_pct" for vt in types], rows)


def format_groups(groups: list[list[str]], dm: DistanceMatrix, threshold: float) -> str:
    """One row per member: group id, beacon, max distance to the rest of its group."""
    idx = {b: i for i, b in enumerate(dm.order)}
    rows = []
    for k, members in enumerate(groups):
        ii = [idx[b] for b in members]
        for b in members:
            others = [dm.scalar_d[idx[b], j] for j in ii if j != idx[b]]
            rows.append([k, b, f"{max(others):.6f}", f"{threshold:.6f}"])
    return tsv(["group", "beacon", "max_within_distance", "threshold"], rows)


def format_transitions(tm: TransitionMatrix, g: MuseumGraph) -> str:
    """Square matrix: from-room rows, to-room columns, probabilities; plus an empty-row flag."""
    names = [r.name for r in g.rooms]
    empty = set(tm.empty_rows)
    rows = [[names[i]] + [f"{p:.6f}" for p in tm.probs[i]] + [int(tm.counts[i].sum()), int(i in empty)] for i in range(len(names))]
    return tsv(["from"] + names + ["n_transitions", "empty_row"], rows)
