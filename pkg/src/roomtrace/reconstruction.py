"""Room-per-bin trajectory reconstruction: AM, MA and NN methods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import neuralnet
from .ingestion import GroundTruth, RssiMatrix
from .museum import MuseumGraph, shortest_path

SIGMA_FLOOR = 1e-6
ADJ_PENALTY = 0.01
DEFAULT_THETA = -85.0
DEFAULT_RUN = 3
FEATURE_KINDS = ("normalized", "smoothed", "raw")


@dataclass
class Trajectory:
    beacon: str
    t0: int
    dt: float
    rooms: np.ndarray
    visit_type: str | None = None
    method: str = "AM"

    @property
    def m(self) -> int:
        return len(self.rooms)

    def segments(self) -> list[tuple[int, int, int]]:
        """Run-length form ``(room, enter_ts, exit_ts)``; exit is the end of the last bin."""
        step = int(round(self.dt * 1000))
        out = []
        start = 0
        for t in range(1, self.m + 1):
            if t == self.m or self.rooms[t] != self.rooms[start]:
                out.append((int(self.rooms[start]), self.t0 + start * step, self.t0 + t * step))
                start = t
        return out


@dataclass(frozen=True)
class SmoothingWindow:
    delta_minus: int = 6
    delta_plus: int = 6

    def __post_init__(self):
        if self.delta_minus < 0 or self.delta_plus < 0:
            raise ValueError("window half-widths must be nonnegative")

    @property
    def width(self) -> int:
        return 1 + self.delta_minus + self.delta_plus


def _trajectory(R: RssiMatrix, rooms, method: str) -> Trajectory:
    return Trajectory(R.beacon, R.t0, R.dt, np.asarray(rooms, dtype=int), None, method)


def _column_argmax_rooms(values: np.ndarray, silent: np.ndarray, g: MuseumGraph) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest receiver index on ties
    rooms = g.receiver_rooms()[np.argmax(values, axis=0)]
    rooms[silent] = g.outside
    return rooms


def argmax_reconstruct(R: RssiMatrix, g: MuseumGraph) -> Trajectory:
    """Strongest receiver per bin, mapped to its room; all-floor bins are outside."""
    silent = np.all(R.values == R.floor, axis=0)
    return _trajectory(R, _column_argmax_rooms(R.values, silent, g), "AM")


def moving_average(R: RssiMatrix, win: SmoothingWindow) -> RssiMatrix:
    """Mean of each receiver's values over bins ``[t - d-, t + d+]``, clamped at the edges."""
    if win.delta_minus == 0 and win.delta_plus == 0:
        return R.with_values(R.values.copy())
    view = _windows(R.values, win, np.nan)
    counts = np.count_nonzero(~np.isnan(view[0]), axis=-1)
    out = np.nansum(view, axis=-1) / counts
    # rounding in the sum may push a constant window off by an ulp
    out = np.clip(out, np.nanmin(view, axis=-1), np.nanmax(view, axis=-1))
    return R.with_values(out)


def _windows(a: np.ndarray, win: SmoothingWindow, fill=None) -> np.ndarray:
    """``(rows, m, width)`` view of the time window around every bin.

    Out-of-range positions hold ``fill``, or repeat the boundary column when
    ``fill`` is None.
    """
    widths = ((0, 0), (win.delta_minus, win.delta_plus))
    pad = np.pad(a, widths, mode="edge") if fill is None else np.pad(a, widths, constant_values=fill)
    return np.lib.stride_tricks.sliding_window_view(pad, win.width, axis=-1)


def normalize_rows(R: RssiMatrix) -> RssiMatrix:
    """Per-receiver z-score with population std, floored at 1e-6."""
    v = R.values
    mu = v.mean(axis=1, keepdims=True)
    centered = v - mu
    # the mean of a constant row may round off its value; pin those rows to zero
    centered[np.ptp(v, axis=1) == 0] = 0.0
    sigma = np.sqrt(np.mean(centered**2, axis=1, keepdims=True))
    sigma = np.maximum(sigma, SIGMA_FLOOR)
    return R.with_values(centered / sigma)


def smooth_and_normalize(R: RssiMatrix, win: SmoothingWindow) -> RssiMatrix:
    return normalize_rows(moving_average(R, win))


def ma_reconstruct(R: RssiMatrix, win: SmoothingWindow, g: MuseumGraph) -> Trajectory:
    """Argmax over the smoothed, row-normalized matrix.

    A bin is outside when no receiver recorded anything inside its smoothing
    window.
    """
    Rbar = smooth_and_normalize(R, win)
    heard = R.coverage.sum(axis=0, keepdims=True)
    silent = _windows(heard, win, 0).sum(axis=-1)[0] == 0
    return _trajectory(R, _column_argmax_rooms(Rbar.values, silent, g), "MA")


def threshold_prefilter(R: RssiMatrix, theta: float = DEFAULT_THETA, k: int = DEFAULT_RUN) -> tuple[int, int] | None:
    """In-museum bin range ``(enter_bin, exit_bin)``, or None if the beacon never entered.

    Only runs of at least ``k`` consecutive bins whose strongest receiver
    reaches ``theta`` count.
    """
    if theta <= R.floor:
        raise ValueError(f"theta {theta} must exceed the floor {R.floor}")
    if k < 1:
        raise ValueError("k must be at least 1")
    loud = R.values.max(axis=0) >= theta
    edges = np.diff(np.concatenate([[0], loud.astype(int), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    keep = (ends - starts + 1) >= k
    if not keep.any():
        return None
    return int(starts[keep][0]), int(ends[keep][-1])


def adjacency_filter(
    p: np.ndarray,
    prev_room: int,
    g: MuseumGraph,
    penalty: float = ADJ_PENALTY,
    strict: bool = True,
) -> int:
    """Pick the room for one bin given the room of the previous bin.

    Probabilities of rooms that are neither ``prev_room`` nor one of its door
    neighbors are multiplied by ``penalty`` and the vector renormalized. With
    ``strict`` the choice is restricted to feasible rooms, and the visitor
    stays in ``prev_room`` when none of them has positive probability.
    """
    feasible = g.adjacency_matrix()[prev_room]
    q = _masked(p, feasible, penalty)
    if not strict:
        return int(np.argmax(q))
    if not np.any(q[feasible] > 0):
        return int(prev_room)
    return int(np.argmax(np.where(feasible, q, -1.0)))


def _masked(p: np.ndarray, feasible: np.ndarray, penalty: float) -> np.ndarray:
    q = np.asarray(p, dtype=float) * np.where(feasible, 1.0, penalty)
    total = q.sum()
    return q / total if total > 0 else q


def window_features(R: RssiMatrix, win: SmoothingWindow, kind: str = "normalized") -> np.ndarray:
    """Flattened ``n x (1 + d- + d+)`` window around every bin, shape ``(m, n*width)``.

    Edge bins repeat the boundary column. Each row is laid out receiver-major:
    all offsets of receiver 0, then receiver 1, and so on.
    """
    if kind == "normalized":
        M = smooth_and_normalize(R, win).values
    elif kind == "smoothed":
        M = moving_average(R, win).values
    elif kind == "raw":
        M = R.values
    else:
        raise ValueError(f"unknown feature kind {kind!r}; expected one of {FEATURE_KINDS}")
    view = _windows(M, win)
    return np.ascontiguousarray(view.transpose(1, 0, 2)).reshape(R.m, -1)


def nn_reconstruct(
    R: RssiMatrix,
    model: neuralnet.NNModel,
    win: SmoothingWindow,
    g: MuseumGraph,
    theta: float = DEFAULT_THETA,
    k: int = DEFAULT_RUN,
    features: str | None = None,
    penalty: float = ADJ_PENALTY,
) -> Trajectory:
    """Network room probabilities per bin, decoded left to right with the adjacency filter.

    Decoding starts from Outside at the first loud bin. Bins after the last
    loud bin follow the shortest door path from the last decoded room back to
    Outside, so every transition in the result goes through a door.
    """
    width = R.n * win.width
    if model.n_inputs != width:
        raise ValueError(f"model expects {model.n_inputs} inputs, window gives {width}")
    if model.n_outputs != g.n_rooms:
        raise ValueError(f"model has {model.n_outputs} outputs for {g.n_rooms} rooms")
    kind = features or model.meta.get("features", "normalized")
    rooms = np.full(R.m, g.outside, dtype=int)
    span = threshold_prefilter(R, theta, k)
    if span is not None:
        enter, leave = span
        p = neuralnet.forward(model, window_features(R, win, kind)[enter : leave + 1])
        prev = g.outside
        for i, pt in enumerate(p):
            prev = adjacency_filter(pt, prev, g, penalty)
            rooms[enter + i] = prev
        exit_path = shortest_path(g, prev, g.outside)[1:-1]
        tail = rooms[leave + 1 : leave + 1 + len(exit_path)]
        tail[:] = exit_path[: len(tail)]
    return _trajectory(R, rooms, "NN")


def accuracy(pred: Trajectory, truth: GroundTruth) -> float:
    """Fraction of bins where the predicted room equals the label."""
    if pred.m != truth.m:
        raise ValueError(f"length mismatch: {pred.m} predicted bins vs {truth.m} labels")
    if pred.m == 0:
        raise ValueError("empty trajectory")
    return float(np.mean(np.asarray(pred.rooms) == np.asarray(truth.rooms)))


def labeled_windows(
    pairs: list[tuple[RssiMatrix, GroundTruth]],
    win: SmoothingWindow,
    kind: str = "normalized",
) -> neuralnet.LabeledSet:
    """Stack window features and labels of several beacons into one set."""
    X = [window_features(R, win, kind) for R, _ in pairs]
    y = [gt.rooms for R, gt in pairs]
    for (R, gt) in pairs:
        if R.m != gt.m:
            raise ValueError(f"beacon {R.beacon}: {R.m} bins vs {gt.m} labels")
    return neuralnet.LabeledSet(np.concatenate(X), np.concatenate(y))
