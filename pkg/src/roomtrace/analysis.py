"""Statistics over ensembles of reconstructed trajectories."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .museum import ORIENTATIONS, MuseumGraph

DEFAULT_MIN_VISIT = 25.0
DEFAULT_MAX_VISIT = 125.0
HISTOGRAM_BINS = 50
GROUP_PERCENTILE = 5.0
GROUP_FRACTION = 0.25


def _rooms(traj) -> np.ndarray:
    return np.asarray(getattr(traj, "rooms", traj), dtype=int)


def _minutes(n_bins, dt: float) -> float:
    return float(n_bins) * dt / 60.0


def visit_span(traj, g: MuseumGraph) -> tuple[int, int] | None:
    """First and last bin spent inside the museum, or None."""
    inside = np.flatnonzero(_rooms(traj) != g.outside)
    if len(inside) == 0:
        return None
    return int(inside[0]), int(inside[-1])


def time_of_visit(traj, g: MuseumGraph) -> float:
    """Minutes from the first to the last in-museum bin, both included."""
    span = visit_span(traj, g)
    if span is None:
        return 0.0
    return _minutes(span[1] - span[0] + 1, traj.dt)


def filter_visits(trajs, g: MuseumGraph, min_min: float = DEFAULT_MIN_VISIT, max_min: float = DEFAULT_MAX_VISIT) -> list:
    """Keep visits lasting between ``min_min`` and ``max_min`` minutes inclusive."""
    return [t for t in trajs if min_min <= time_of_visit(t, g) <= max_min]


def trim_to_visit(traj, g: MuseumGraph):
    """Copy of ``traj`` cut to its in-museum span (unchanged if it never entered)."""
    span = visit_span(traj, g)
    if span is None:
        return traj
    a, b = span
    step = int(round(traj.dt * 1000))
    return replace(traj, rooms=_rooms(traj)[a : b + 1].copy(), t0=traj.t0 + a * step)


@dataclass
class VisitStats:
    beacon: str
    visit_type: str | None
    time_of_visit: float
    per_room_permanence: dict  # room index -> minutes


def visit_stats(traj, g: MuseumGraph) -> VisitStats:
    counts = np.bincount(_rooms(traj), minlength=g.n_rooms)
    perm = {r: _minutes(counts[r], traj.dt) for r in g.interior}
    return VisitStats(traj.beacon, traj.visit_type, time_of_visit(traj, g), perm)


def permanence_matrix(trajs, g: MuseumGraph) -> np.ndarray:
    """Minutes spent in every room, one row per trajectory."""
    out = np.zeros((len(trajs), g.n_rooms))
    for i, t in enumerate(trajs):
        out[i] = np.bincount(_rooms(t), minlength=g.n_rooms) * t.dt / 60.0
    return out


def time_of_permanence(trajs, g: MuseumGraph) -> dict[str, np.ndarray]:
    """Mean minutes per room, grouped by visit type (``None`` types become "Unlabeled")."""
    out = {}
    for vt in _visit_types(trajs):
        group = [t for t in trajs if (t.visit_type or "Unlabeled") == vt]
        out[vt] = permanence_matrix(group, g).mean(axis=0)
    return out


def _visit_types(trajs) -> list[str]:
    order = ["Normal", "Audioguide", "Guide"]
    seen = {t.visit_type or "Unlabeled" for t in trajs}
    return [v for v in order if v in seen] + sorted(seen - set(order))


def tov_summary(trajs, g: MuseumGraph) -> dict[str, tuple[float, float, int]]:
    """Per visit type: mean and population std of the time of visit, and the count."""
    out = {}
    for vt in _visit_types(trajs):
        tov = np.array([time_of_visit(t, g) for t in trajs if (t.visit_type or "Unlabeled") == vt])
        out[vt] = (float(tov.mean()), float(tov.std()), len(tov))
    return out


def clockwisety_details(traj, g: MuseumGraph) -> tuple[int, int]:
    """Clockwisety score and the number of room changes that cross no door."""
    rooms = _rooms(traj)
    score = 0
    infeasible = 0
    change = np.flatnonzero(rooms[1:] != rooms[:-1])
    for t in change:
        label = g.orientation(int(rooms[t]), int(rooms[t + 1]))
        if label is None:
            infeasible += 1
        else:
            score += ORIENTATIONS[label]
    return score, infeasible


def clockwisety(traj, g: MuseumGraph) -> int:
    """Counterclockwise door crossings minus clockwise ones."""
    return clockwisety_details(traj, g)[0]


def _aligned(X, Y, pad_room: int | None, align: str) -> tuple[np.ndarray, np.ndarray]:
    x, y = _rooms(X), _rooms(Y)
    if align == "absolute":
        if pad_room is None:
            raise ValueError("absolute alignment needs a pad room")
        step = int(round(X.dt * 1000))
        if int(round(Y.dt * 1000)) != step:
            raise ValueError("trajectories use different bin lengths")
        shift = (Y.t0 - X.t0) // step
        if shift > 0:
            y = np.concatenate([np.full(shift, pad_room), y])
        elif shift < 0:
            x = np.concatenate([np.full(-shift, pad_room), x])
    elif align != "start":
        raise ValueError(f"unknown alignment {align!r}")
    if len(x) != len(y):
        if pad_room is None:
            raise ValueError(f"length mismatch: {len(x)} vs {len(y)} bins")
        m = max(len(x), len(y))
        x = np.concatenate([x, np.full(m - len(x), pad_room)])
        y = np.concatenate([y, np.full(m - len(y), pad_room)])
    return x, y


def trajectory_distance(X, Y, w: np.ndarray, pad_room: int | None = None, align: str = "start") -> complex:
    """Sum over bins of the room-pair weight ``w[X_t, Y_t]``.

    With ``align="start"`` both sequences start together and the shorter one
    is padded at the tail with ``pad_room``; ``"absolute"`` lines bins up by
    timestamp first. Without a pad room, lengths must already agree.
    """
    x, y = _aligned(X, Y, pad_room, align)
    terms = w[x, y]
    return complex(terms.real.sum(), terms.imag.sum())


def scalar_distance(d: complex) -> float:
    return float(np.hypot(d.real, d.imag))


@dataclass
class DistanceMatrix:
    order: list[str]
    complex_d: np.ndarray
    scalar_d: np.ndarray

    def __len__(self) -> int:
        return len(self.order)

    def off_diagonal(self) -> np.ndarray:
        iu = np.triu_indices(len(self), k=1)
        return self.scalar_d[iu]


def _padded_stack(trajs, pad_room: int | None, align: str) -> np.ndarray:
    seqs = [_rooms(t) for t in trajs]
    if align == "absolute":
        step = int(round(trajs[0].dt * 1000))
        origin = min(t.t0 for t in trajs)
        heads = [(t.t0 - origin) // step for t in trajs]
        if pad_room is None and any(heads):
            raise ValueError("absolute alignment needs a pad room")
        seqs = [np.concatenate([np.full(h, pad_room if pad_room is not None else 0), s]) for h, s in zip(heads, seqs)]
    elif align != "start":
        raise ValueError(f"unknown alignment {align!r}")
    m = max(len(s) for s in seqs)
    if pad_room is None and any(len(s) != m for s in seqs):
        raise ValueError("length mismatch and no pad room given")
    out = np.empty((len(seqs), m), dtype=int)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
        out[i, len(s) :] = pad_room if pad_room is not None else 0
    return out


def distance_matrix(
    trajs,
    w: np.ndarray,
    pad_room: int | None = None,
    align: str = "start",
    per_bin_modulus: bool = False,
) -> DistanceMatrix:
    """All-pairs trajectory distances.

    ``scalar_d`` is the modulus of the complex sum, or with
    ``per_bin_modulus`` the sum of per-bin moduli.
    """
    if len(trajs) < 2:
        raise ValueError("need at least two trajectories")
    X = _padded_stack(trajs, pad_room, align)
    N = len(X)
    cd = np.zeros((N, N), dtype=complex)
    sd = np.zeros((N, N))
    wabs = np.abs(w)
    for i in range(N - 1):
        terms = w[X[i][None, :], X[i + 1 :]]
        row = terms.real.sum(axis=1) + 1j * terms.imag.sum(axis=1)
        cd[i, i + 1 :] = row
        if per_bin_modulus:
            sd[i, i + 1 :] = wabs[X[i][None, :], X[i + 1 :]].sum(axis=1)
        else:
            sd[i, i + 1 :] = np.hypot(row.real, row.imag)
    cd = cd + cd.T
    sd = sd + sd.T
    return DistanceMatrix([t.beacon for t in trajs], cd, sd)


def default_bin_width(dm: DistanceMatrix) -> float:
    top = float(dm.scalar_d.max())
    return top / HISTOGRAM_BINS if top > 0 else 1.0


def modal_intervals(dm: DistanceMatrix, bin_width: float) -> np.ndarray:
    """Lower edge of the most populated distance interval of every trajectory."""
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    N = len(dm)
    lows = np.empty(N)
    for i in range(N):
        d = np.delete(dm.scalar_d[i], i)
        k = np.floor(d / bin_width).astype(np.int64)
        lows[i] = np.argmax(np.bincount(k)) * bin_width
    return lows


def common_paths(dm: DistanceMatrix, bin_width: float | None = None) -> tuple[str, str]:
    """Most and least common trajectory by interval mode of their distances."""
    if len(dm) < 2:
        raise ValueError("need at least two trajectories")
    lows = modal_intervals(dm, bin_width or default_bin_width(dm))
    # np.argmin / np.argmax resolve ties to the earliest index
    return dm.order[int(np.argmin(lows))], dm.order[int(np.argmax(lows))]


def default_group_threshold(dm: DistanceMatrix) -> float:
    """A quarter of the 5th percentile of the off-diagonal distances."""
    return GROUP_FRACTION * float(np.percentile(dm.off_diagonal(), GROUP_PERCENTILE))


def detect_groups(dm: DistanceMatrix, threshold: float | None = None) -> list[list[str]]:
    """Single-linkage clusters of trajectories closer than ``threshold``.

    Clusters are connected components of the graph joining pairs with
    distance at most ``threshold``; singletons are left out.
    """
    if threshold is None:
        threshold = default_group_threshold(dm)
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    near = dm.scalar_d <= threshold
    np.fill_diagonal(near, False)
    _, labels = connected_components(csr_matrix(near), directed=False)
    out = []
    for lab in np.unique(labels):
        members = np.flatnonzero(labels == lab)
        if len(members) > 1:
            out.append([dm.order[i] for i in members])
    return sorted(out, key=lambda c: c[0])


@dataclass
class TransitionMatrix:
    probs: np.ndarray
    counts: np.ndarray

    @property
    def empty_rows(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.counts.sum(axis=1) == 0)]


def transition_matrix(trajs, g: MuseumGraph) -> TransitionMatrix:
    """Row-stochastic room-change frequencies; rows without changes stay zero."""
    K = g.n_rooms
    counts = np.zeros((K, K), dtype=np.int64)
    for t in trajs:
        r = _rooms(t)
        moved = r[1:] != r[:-1]
        np.add.at(counts, (r[:-1][moved], r[1:][moved]), 1)
    if counts.sum() == 0:
        raise ValueError("no room changes in the ensemble")
    totals = counts.sum(axis=1, keepdims=True)
    probs = np.divide(counts, totals, out=np.zeros((K, K)), where=totals > 0)
    return TransitionMatrix(probs, counts)
