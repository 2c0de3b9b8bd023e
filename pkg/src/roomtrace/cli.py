"""Command-line front end.

Every subcommand reads its inputs from files, writes plain-text outputs into
``--out`` and exits 0. Failures print one line ``error: <category>: <message>``
to stderr and exit with a nonzero status.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, ingestion, neuralnet, reconstruction, simulator, tables
from .museum import GraphConfigError, build_weight_table, default_graph, load_graph_file

log = logging.getLogger("roomtrace")

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SCHEMA = 4
EXIT_SHAPE = 5
EXIT_RUNTIME = 6


class CliError(Exception):
    def __init__(self, category: str, message: str, code: int):
        super().__init__(message)
        self.category = category
        self.code = code


def _graph(args):
    if args.graph is None:
        return default_graph()
    try:
        return load_graph_file(args.graph)
    except FileNotFoundError:
        raise CliError("missing-file", f"graph config {args.graph} not found", EXIT_INPUT) from None
    except GraphConfigError as exc:
        raise CliError("schema", f"{args.graph}: {exc}", EXIT_SCHEMA) from None


def _read_text(path, what: str) -> str:
    if path is None:
        raise CliError("usage", f"--{what} is required", EXIT_USAGE)
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise CliError("missing-file", f"{what} file {path} not found", EXIT_INPUT) from None


def _window(text: str) -> reconstruction.SmoothingWindow:
    try:
        a, b = (int(x) for x in text.split(","))
        return reconstruction.SmoothingWindow(a, b)
    except ValueError:
        raise argparse.ArgumentTypeError(f"window must be 'minus,plus' nonnegative integers, got {text!r}") from None


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _matrices(args, g):
    text = _read_text(args.log, "log")
    try:
        sightings = ingestion.parse_log(text.splitlines(), g.n_receivers)
    except ingestion.LogFormatError as exc:
        raise CliError("schema", f"{args.log} {exc}", EXIT_SCHEMA) from None
    return ingestion.bin_sightings(sightings, g, args.dt, args.floor)


def _labels(args, g, required=False):
    if getattr(args, "labels", None) is None:
        if required:
            raise CliError("usage", "--labels is required", EXIT_USAGE)
        return None
    try:
        return ingestion.parse_labels(_read_text(args.labels, "labels").splitlines(), g)
    except ingestion.LogFormatError as exc:
        raise CliError("schema", f"{args.labels} {exc}", EXIT_SCHEMA) from None


def _trajectories(args, g):
    try:
        trajs = tables.parse_trajectories(_read_text(args.trajectories, "trajectories"), g, args.trajectories)
    except tables.TableFormatError as exc:
        raise CliError("schema", str(exc), EXIT_SCHEMA) from None
    labels = _labels(args, g)
    if labels is not None:
        for t in trajs:
            t.visit_type = labels.visit_types.get(t.beacon)
    return sorted(trajs, key=lambda t: t.beacon)


def _truth(labels, obj):
    if obj.beacon not in labels.events:
        raise CliError("schema", f"no labels for beacon {obj.beacon}", EXIT_SCHEMA)
    try:
        return ingestion.align_ground_truth(
            labels.events[obj.beacon], obj, labels.visit_types.get(obj.beacon, "Normal")
        )
    except ValueError as exc:
        raise CliError("schema", f"beacon {obj.beacon}: {exc}", EXIT_SCHEMA) from None


def cmd_simulate(args):
    g = _graph(args)
    noise = simulator.NoiseModel.zero() if args.noise == "zero" else simulator.NoiseModel()
    policy = simulator.default_policy(g, n_groups=args.groups, group_size=args.group_size, group_lag=args.group_lag)
    sim = simulator.simulate_visits(g, policy, args.visitors, seed=args.seed, noise=noise, dt=args.dt)
    out = _out(args)
    (out / "sightings.jsonl").write_text(ingestion.format_log(sim.sightings))
    (out / "labels.jsonl").write_text(ingestion.format_labels(sim.truths, g))
    groups = [[k, b] for k, members in enumerate(sim.groups()) for b in members]
    (out / "planted_groups.tsv").write_text(tables.tsv(["group", "beacon"], groups))
    print(f"simulated {args.visitors} visitors, {len(sim.table)} sightings")


def _load_model(args, g):
    if args.model is None:
        raise CliError("usage", "model required: --method nn needs --model (run `roomtrace train` first)", EXIT_USAGE)
    try:
        model = neuralnet.load_model(args.model)
    except FileNotFoundError:
        raise CliError("missing-file", f"model file {args.model} not found", EXIT_INPUT) from None
    except (ValueError, KeyError) as exc:
        raise CliError("schema", f"{args.model}: {exc}", EXIT_SCHEMA) from None
    return model


def _reconstruct(args, g, matrices):
    if args.method == "nn":
        model = _load_model(args, g)
        try:
            return [
                reconstruction.nn_reconstruct(R, model, args.window, g, args.theta, features=args.features)
                for R in matrices
            ]
        except ValueError as exc:
            raise CliError("shape", str(exc), EXIT_SHAPE) from None
    if args.method == "ma":
        return [reconstruction.ma_reconstruct(R, args.window, g) for R in matrices]
    return [reconstruction.argmax_reconstruct(R, g) for R in matrices]


def cmd_reconstruct(args):
    g = _graph(args)
    if args.method == "nn":
        _load_model(args, g)
    trajs = _reconstruct(args, g, _matrices(args, g))
    out = _out(args)
    (out / f"trajectories_{args.method}.tsv").write_text(tables.format_trajectories(trajs, g))
    (out / f"segments_{args.method}.tsv").write_text(tables.format_segments(trajs, g))
    print(f"reconstructed {len(trajs)} trajectories with {args.method.upper()}")


def cmd_train(args):
    g = _graph(args)
    labels = _labels(args, g, required=True)
    pairs = [(R, _truth(labels, R)) for R in _matrices(args, g)]
    features = args.features or "normalized"
    data = reconstruction.labeled_windows(pairs, args.window, features)
    rng = np.random.default_rng(args.seed)
    if args.train_bins and args.train_bins < len(data):
        pick = np.sort(rng.choice(len(data), args.train_bins, replace=False))
        data = neuralnet.LabeledSet(data.inputs[pick], data.targets[pick])
    cfg = neuralnet.TrainConfig(
        learning_rate=args.lr, iterations=args.iterations, seed=args.seed, hidden=args.hidden,
        reduction=args.reduction,
    )
    try:
        model = neuralnet.train(data, cfg, n_outputs=g.n_rooms)
    except neuralnet.TrainingDiverged as exc:
        raise CliError("runtime", str(exc), EXIT_RUNTIME) from None
    model.meta["features"] = features
    model.meta["window"] = [args.window.delta_minus, args.window.delta_plus]
    out = _out(args)
    neuralnet.save_model(model, out / "model.json")
    hist = [[s, repr(v)] for s, v in model.meta["loss_history"]]
    (out / "train_loss.tsv").write_text(tables.tsv(["step", "loss"], hist))
    print(f"trained on {len(data)} bins, final loss {model.meta['loss_history'][-1][1]:.6f}, "
          f"training accuracy {neuralnet.evaluate(model, data):.3f}")


def cmd_eval(args):
    g = _graph(args)
    labels = _labels(args, g, required=True)
    trajs = _trajectories(args, g)
    rows, hits, total = [], 0, 0
    for t in trajs:
        gt = _truth(labels, t)
        acc = reconstruction.accuracy(t, gt)
        hits += int(np.sum(t.rooms == gt.rooms))
        total += t.m
        rows.append([t.beacon, t.method, t.m, f"{acc:.6f}"])
    if total == 0:
        raise CliError("schema", "no trajectories to evaluate", EXIT_SCHEMA)
    out = _out(args)
    (out / "eval.tsv").write_text(tables.tsv(["beacon", "method", "bins", "accuracy"], rows))
    print(f"accuracy {hits / total:.3f}")


def cmd_analyze(args):
    g = _graph(args)
    trajs = analysis.filter_visits(_trajectories(args, g), g, args.min_visit, args.max_visit)
    if not trajs:
        raise CliError("schema", "no visits left after filtering", EXIT_SCHEMA)
    out = _out(args)
    (out / "permanence.tsv").write_text(tables.format_permanence(analysis.time_of_permanence(trajs, g), g))
    (out / "tov_summary.tsv").write_text(tables.format_tov_summary(analysis.tov_summary(trajs, g)))
    scores: dict[str, list[int]] = {}
    visit_rows = []
    for t in trajs:
        cw, bad = analysis.clockwisety_details(t, g)
        vt = t.visit_type or "Unlabeled"
        scores.setdefault(vt, []).append(cw)
        visit_rows.append([t.beacon, vt, f"{analysis.time_of_visit(t, g):.3f}", cw, bad])
    (out / "clockwisety_hist.tsv").write_text(tables.format_clockwisety(scores))
    (out / "visits.tsv").write_text(
        tables.tsv(["beacon", "visit_type", "tov_min", "clockwisety", "doorless_changes"], visit_rows)
    )
    tov = np.array([analysis.time_of_visit(t, g) for t in trajs])
    (out / "tov_hist.tsv").write_text(tables.histogram_series(tov, 5.0))
    print(tables.format_tov_summary(analysis.tov_summary(trajs, g)), end="")


def _ensemble_for_distances(args, g):
    trajs = analysis.filter_visits(_trajectories(args, g), g, args.min_visit, args.max_visit)
    if args.align == "visit":
        return [analysis.trim_to_visit(t, g) for t in trajs], "start"
    return trajs, args.align


def cmd_distmat(args):
    g = _graph(args)
    trajs, align = _ensemble_for_distances(args, g)
    if len(trajs) < 2:
        raise CliError("schema", "need at least two visits for a distance matrix", EXIT_SCHEMA)
    dm = analysis.distance_matrix(trajs, build_weight_table(g), g.outside, align, args.per_bin_modulus)
    out = _out(args)
    (out / "distances.tsv").write_text(tables.format_distances(dm))
    width = args.bin_width or analysis.default_bin_width(dm)
    (out / "distance_hist.tsv").write_text(tables.histogram_series(dm.off_diagonal(), width))
    print(f"{len(dm)} trajectories, {len(dm) * (len(dm) - 1) // 2} pairs")


def _distances(args):
    try:
        dm = tables.parse_distances(_read_text(args.distances, "distances"), args.distances)
    except tables.TableFormatError as exc:
        raise CliError("schema", str(exc), EXIT_SCHEMA) from None
    if len(dm) < 2:
        raise CliError("schema", "distance table holds fewer than two trajectories", EXIT_SCHEMA)
    return dm


def cmd_common(args):
    dm = _distances(args)
    width = args.bin_width or analysis.default_bin_width(dm)
    most, least = analysis.common_paths(dm, width)
    lows = analysis.modal_intervals(dm, width)
    out = _out(args)
    rows = [["most_common", most, f"{lows[dm.order.index(most)]:.6f}"],
            ["least_common", least, f"{lows[dm.order.index(least)]:.6f}"]]
    (out / "common.tsv").write_text(tables.tsv(["role", "beacon", "modal_interval_lo"], rows))
    for role, b in (("most", most), ("least", least)):
        i = dm.order.index(b)
        d = np.delete(dm.scalar_d[i], i)
        (out / f"{role}_common_hist.tsv").write_text(tables.histogram_series(d, width))
    print(f"most common {most}, least common {least}")


def cmd_groups(args):
    dm = _distances(args)
    threshold = args.threshold or analysis.default_group_threshold(dm)
    try:
        groups = analysis.detect_groups(dm, threshold)
    except ValueError as exc:
        raise CliError("usage", str(exc), EXIT_USAGE) from None
    out = _out(args)
    (out / "groups.tsv").write_text(tables.format_groups(groups, dm, threshold))
    print(f"{len(groups)} groups at threshold {threshold:.3f}")


def cmd_transition(args):
    g = _graph(args)
    trajs = _trajectories(args, g)
    try:
        tm = analysis.transition_matrix(trajs, g)
    except ValueError as exc:
        raise CliError("schema", str(exc), EXIT_SCHEMA) from None
    out = _out(args)
    (out / "transition.tsv").write_text(tables.format_transitions(tm, g))
    print(f"{int(tm.counts.sum())} transitions; empty rows: {tm.empty_rows}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="roomtrace", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, *, log=False, labels=False, trajectories=False, recon=False, visits=False):
        sp.add_argument("--graph", help="museum graph config (TOML); default: bundled Borghese fixture")
        sp.add_argument("--out", default=".", help="output directory (created if missing)")
        sp.add_argument("--seed", type=int, default=0, help="seed for every random choice")
        if log:
            sp.add_argument("--log", help="sighting log (JSON lines: beacon, receiver, rssi, ts)")
            sp.add_argument("--dt", type=float, default=ingestion.DEFAULT_DT, help="bin length in seconds")
            sp.add_argument("--floor", type=float, default=ingestion.DEFAULT_FLOOR, help="dBm for cells without samples")
        if labels:
            sp.add_argument("--labels", help="ground-truth labels (JSON lines: beacon, ts, room[, visit_type])")
        if trajectories:
            sp.add_argument("--trajectories", help="per-bin trajectory table written by `reconstruct`")
        if recon:
            sp.add_argument("--window", type=_window, default=reconstruction.SmoothingWindow(),
                            help="smoothing window 'minus,plus' in bins (default 6,6)")
            sp.add_argument("--features", choices=reconstruction.FEATURE_KINDS, default=None,
                            help="network input matrix (default: as stored in the model, else normalized)")
        if visits:
            sp.add_argument("--min-visit", type=float, default=analysis.DEFAULT_MIN_VISIT, help="minimum visit minutes")
            sp.add_argument("--max-visit", type=float, default=analysis.DEFAULT_MAX_VISIT, help="maximum visit minutes")

    sp = sub.add_parser("simulate", help="write a synthetic sighting log and labels")
    common(sp)
    sp.add_argument("--visitors", type=int, default=100, help="number of simulated visitors")
    sp.add_argument("--noise", choices=["default", "zero"], default="default", help="noise preset")
    sp.add_argument("--dt", type=float, default=ingestion.DEFAULT_DT, help="bin length in seconds")
    sp.add_argument("--groups", type=int, default=0, help="number of planted groups")
    sp.add_argument("--group-size", type=int, default=2, help="members per planted group")
    sp.add_argument("--group-lag", type=int, default=1, help="bins between consecutive group members")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("reconstruct", help="rebuild room trajectories from a sighting log")
    common(sp, log=True, recon=True)
    sp.add_argument("--method", choices=["am", "ma", "nn"], default="am", help="reconstruction method")
    sp.add_argument("--model", help="trained model (required for --method nn)")
    sp.add_argument("--theta", type=float, default=reconstruction.DEFAULT_THETA, help="entry threshold in dBm (nn)")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("train", help="train the room classifier on a labeled log")
    common(sp, log=True, labels=True, recon=True)
    sp.add_argument("--iterations", type=int, default=20000, help="gradient descent steps")
    sp.add_argument("--lr", type=float, default=1e-4, help="learning rate")
    sp.add_argument("--hidden", type=int, default=64, help="hidden units")
    sp.add_argument("--reduction", choices=["sum", "mean"], default="sum",
                    help="descend the summed (default) or the mean cross-entropy")
    sp.add_argument("--train-bins", type=int, default=5500, help="labeled bins sampled for training (0 = all)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy of reconstructed trajectories against labels")
    common(sp, labels=True, trajectories=True)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("analyze", help="permanence, time of visit and clockwisety tables")
    common(sp, labels=True, trajectories=True, visits=True)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("distmat", help="all-pairs trajectory distances")
    common(sp, trajectories=True, visits=True)
    sp.add_argument("--align", choices=["visit", "start", "absolute"], default="visit",
                    help="visit: compare from each visit's first bin; start: from each trajectory's first bin; "
                         "absolute: by timestamp")
    sp.add_argument("--per-bin-modulus", action="store_true", help="scalar distance as the sum of per-bin moduli")
    sp.add_argument("--bin-width", type=float, help="histogram bin width (default max/50)")
    sp.set_defaults(func=cmd_distmat)

    sp = sub.add_parser("common", help="most and least common visit path")
    common(sp)
    sp.add_argument("--distances", help="distance table written by `distmat`")
    sp.add_argument("--bin-width", type=float, help="interval width (default max/50)")
    sp.set_defaults(func=cmd_common)

    sp = sub.add_parser("groups", help="trajectories moving together")
    common(sp)
    sp.add_argument("--distances", help="distance table written by `distmat`")
    sp.add_argument("--threshold", type=float, help="linkage cutoff (default: a quarter of the 5th percentile)")
    sp.set_defaults(func=cmd_groups)

    sp = sub.add_parser("transition", help="room-to-room transition probabilities")
    common(sp, labels=True, trajectories=True)
    sp.set_defaults(func=cmd_transition)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("ROOMTRACE_LOG_LEVEL", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.code
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return 0


if __name__ == "__main__":
    sys.exit(main())
