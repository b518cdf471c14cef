"""Command-line surface: simulate, infer, study, metrics and negctl."""
import sys
import json
import logging
import argparse

import numpy as np
import pandas as pd

from typing import Callable

from phylodyn_ps import __version__
from phylodyn_ps.artifacts import ArtifactFrame, ArtifactWriter, to_serializable
from phylodyn_ps.config import DEFAULT_BETA1, DEFAULT_CONTROLS, DEFAULT_EVAL_POINTS, DEFAULT_GRID, DEFAULT_INTERVALS
from phylodyn_ps.config import DEFAULT_MODELS, DEFAULT_N, DEFAULT_OUT, DEFAULT_REPLICATES, DEFAULT_SCHEDULES
from phylodyn_ps.config import DEFAULT_SEASON_A, DEFAULT_SEASON_O, DEFAULT_SEED, DEFAULT_WINDOW, load_config
from phylodyn_ps.exceptions import PhylodynError
from phylodyn_ps.genealogy import DEFAULT_TOL, decompose_intervals, extract_events, read_sidecar, write_sidecar
from phylodyn_ps.grid_traj import TRAJECTORY_COLUMNS, build_grid
from phylodyn_ps.inference import SUMMARY_COLUMNS, ModelKind, PosteriorSummary, reconstruct
from phylodyn_ps.metrics import POINTWISE_COLUMNS, STUDY_COLUMNS, emrw, format_interval, pointwise_emrw
from phylodyn_ps.metrics import pointwise_table, seasonal_overlay, study_table
from phylodyn_ps.newick import read_newick, serialize_newick
from phylodyn_ps.simulator import IntensityFn, sample_times, seasonal_trajectory, simulate_coalescent
from phylodyn_ps.simulator import simulated_tip_times
from phylodyn_ps.study import SCHEDULES, StudyConfig, beta1_recovery, run_study, schedule_intensity

logger = logging.getLogger(__name__)

# Define constants
EXIT_OK: int = 0
EXIT_FAILURE: int = 1
TREE_NAME: str = "tree.nwk"
SIDECAR_NAME: str = "tips.tsv"
TRUTH_NAME: str = "truth.csv"
TRAJECTORY_NAME: str = "trajectory.csv"
INTERVALS_NAME: str = "intervals.csv"
SUMMARY_NAME: str = "summary.json"
STUDY_NAME: str = "study.csv"
POINTWISE_NAME: str = "pointwise.csv"
RECOVERY_NAME: str = "beta1.json"
EMRW_NAME: str = "emrw.csv"
POINTWISE_EMRW_NAME: str = "pointwise_emrw.csv"
SEASONAL_NAME: str = "seasonal.csv"
TRUTH_HORIZON_FACTOR: float = 8.0
TRUTH_CELLS_PER_UNIT: int = 10

def parse_interval(text: str) -> tuple[float, float]:
    """Parses `a:b` into (a, b) with a < b."""
    try:
        a, b = (float(part) for part in str(text).split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an interval a:b, got {text!r}")
    if not a < b:
        raise argparse.ArgumentTypeError(f"interval {text!r} must satisfy a < b")
    return a, b

def parse_intervals(text: str) -> list[tuple[float, float]]:
    return [parse_interval(part) for part in str(text).split(",") if part.strip()]

def parse_names(choices: tuple[str]) -> Callable[[str], list[str]]:
    def parse(text: str) -> list[str]:
        names = [name.strip() for name in str(text).split(",") if name.strip()]
        unknown = [name for name in names if name not in choices]
        if unknown or not names:
            raise argparse.ArgumentTypeError(f"choose from {', '.join(choices)}; got {text!r}")
        return names
    return parse

MODEL_NAMES: tuple[str] = tuple(kind.value for kind in ModelKind)

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help = False)
    common.add_argument("--config", help = "JSON file with option values; explicit flags win")
    common.add_argument("--seed", type = int, default = DEFAULT_SEED, help = "master random seed")
    common.add_argument("--out", default = DEFAULT_OUT, help = "output directory")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action = "store_true", help = "debug logging")
    verbosity.add_argument("--quiet", action = "store_true", help = "warnings only")

    parser = argparse.ArgumentParser(prog = "phylodyn-ps", description = "Phylodynamic reconstruction with preferential sampling.")
    parser.add_argument("--version", action = "version", version = f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest = "command", required = True)
    commands = {}

    simulate = subparsers.add_parser("simulate", parents = [common], help = "simulate a genealogy under a seasonal trajectory")
    simulate.add_argument("--ne", choices = ["seasonal"], default = "seasonal", help = "population trajectory family")
    simulate.add_argument("--a", type = float, default = DEFAULT_SEASON_A, help = "seasonal smoothness")
    simulate.add_argument("--o", type = float, default = DEFAULT_SEASON_O, help = "seasonal offset")
    simulate.add_argument("--schedule", choices = SCHEDULES, default = "uniform", help = "sampling schedule")
    simulate.add_argument("--n", type = int, default = DEFAULT_N, help = "expected number of samples")
    simulate.add_argument("--window", type = parse_interval, default = DEFAULT_WINDOW, help = "sampling window a:b")
    simulate.add_argument("--beta1", type = float, default = DEFAULT_BETA1, help = "exponent of the hyperproportional schedule")
    simulate.add_argument("--method", choices = ["thinning", "rescaling"], default = "thinning", help = "point process simulator")
    simulate.add_argument("--fixed-count", action = "store_true", help = "draw exactly n samples")
    simulate.set_defaults(handler = run_simulate)
    commands["simulate"] = simulate

    infer = subparsers.add_parser("infer", parents = [common], help = "reconstruct N(t) from a dated tree")
    infer.add_argument("--model", choices = MODEL_NAMES, default = ModelKind.BNPR_PS.value, help = "model")
    infer.add_argument("--tree", help = "Newick file (required)")
    infer.add_argument("--sidecar", help = "tab separated label/time file")
    infer.add_argument("--forward", action = "store_true", help = "sidecar times run forward (e.g. calendar years)")
    infer.add_argument("--s0", type = float, help = "end of the sampling window (defaults to the oldest sample)")
    infer.add_argument("--grid", type = int, default = DEFAULT_GRID, help = "number of grid cells")
    infer.add_argument("--tol", type = float, default = DEFAULT_TOL, help = "sampling time merge tolerance")
    infer.set_defaults(handler = run_infer)
    commands["infer"] = infer

    for name, schedules, description in (
        ("study", DEFAULT_SCHEDULES, "run a simulation study"),
        ("negctl", DEFAULT_CONTROLS, "run the negative-control study"),
    ):
        study = subparsers.add_parser(name, parents = [common], help = description)
        study.add_argument("--replicates", type = int, default = DEFAULT_REPLICATES, help = "replicates per schedule")
        study.add_argument("--n", type = int, default = DEFAULT_N, help = "expected number of samples")
        study.add_argument("--schedules", type = parse_names(SCHEDULES), default = schedules, help = "comma separated schedules")
        study.add_argument("--models", type = parse_names(MODEL_NAMES), default = DEFAULT_MODELS, help = "comma separated models")
        study.add_argument("--intervals", type = parse_intervals, default = DEFAULT_INTERVALS, help = "comma separated a:b intervals")
        study.add_argument("--window", type = parse_interval, default = DEFAULT_WINDOW, help = "sampling window a:b")
        study.add_argument("--a", type = float, default = DEFAULT_SEASON_A, help = "seasonal smoothness")
        study.add_argument("--o", type = float, default = DEFAULT_SEASON_O, help = "seasonal offset")
        study.add_argument("--grid", type = int, default = DEFAULT_GRID, help = "number of grid cells")
        study.add_argument("--eval-points", type = int, default = DEFAULT_EVAL_POINTS, help = "k, for k + 1 evaluation points")
        study.add_argument("--beta1", type = float, default = DEFAULT_BETA1, help = "exponent of the hyperproportional schedule")
        study.add_argument("--jobs", type = int, default = 1, help = "parallel worker processes")
        study.set_defaults(handler = run_study_command)
        commands[name] = study

    metrics = subparsers.add_parser("metrics", parents = [common], help = "empirical widths of saved reconstructions")
    metrics.add_argument("--trajectories", nargs = "+", help = "trajectory CSV files written by infer (required)")
    metrics.add_argument("--intervals", type = parse_intervals, default = DEFAULT_INTERVALS, help = "comma separated a:b intervals")
    metrics.add_argument("--period", type = float, help = "fold each reconstruction onto this period")
    metrics.add_argument("--bins", type = int, default = 12, help = "phase bins of the seasonal overlay")
    metrics.set_defaults(handler = run_metrics)
    commands["metrics"] = metrics

    return parser, commands

def truth_grid(window: tuple[float, float]):
    horizon = TRUTH_HORIZON_FACTOR * window[1]
    return build_grid(0.0, horizon, max(2, int(round(horizon * TRUTH_CELLS_PER_UNIT))))

def run_simulate(args: argparse.Namespace, writer: ArtifactWriter) -> dict:
    truth = seasonal_trajectory(args.a, args.o, truth_grid(args.window))
    master = np.random.SeedSequence(args.seed)
    intensity_seed, sampling_seed, coalescent_seed = master.spawn(3)
    config = StudyConfig(a = args.a, o = args.o, window = args.window, n = args.n, beta1 = args.beta1,
        truth_horizon = truth.grid.t_max, truth_cells = truth.grid.B, schedules = (args.schedule,), seed = args.seed)
    intensity: IntensityFn = schedule_intensity(config, args.schedule, truth, intensity_seed)
    samples = sample_times(intensity, target_n = args.n, seed = sampling_seed, fixed_count = args.fixed_count, method = args.method)
    gen = simulate_coalescent(samples, truth, seed = coalescent_seed, s0 = args.window[1])

    writer.write_text(TREE_NAME, serialize_newick(gen.tree) + "\n")
    write_sidecar(writer.path(SIDECAR_NAME), simulated_tip_times(gen))
    writer.written.append(SIDECAR_NAME)
    writer.write_frame(TRUTH_NAME, truth.to_frame(), columns = TRAJECTORY_COLUMNS)
    print(f"Genealogy of {gen.n} tips saved")
    return {"tips": gen.n, "sampling_events": gen.m, "root_time": gen.root_time}

def run_infer(args: argparse.Namespace, writer: ArtifactWriter) -> dict:
    if not args.tree:
        args.subparser.error("--tree is required")
    tree = read_newick(args.tree)
    sidecar = None if args.sidecar is None else read_sidecar(args.sidecar, forward = args.forward)
    gen = extract_events(tree, tol = args.tol, s0 = args.s0, sidecar = sidecar)
    summary = reconstruct(gen, args.model, grid_size = args.grid)

    writer.write_frame(TRAJECTORY_NAME, summary.to_frame(), columns = SUMMARY_COLUMNS)
    writer.write_json(SUMMARY_NAME, summary.to_dict())
    writer.write_frame(INTERVALS_NAME, decompose_intervals(gen, summary.grid).to_frame())
    print("Summary saved")
    return summary.hyperparameter_dict()

def run_study_command(args: argparse.Namespace, writer: ArtifactWriter) -> dict:
    config = StudyConfig(
        a = args.a, o = args.o, window = args.window, n = args.n, replicates = args.replicates,
        grid_size = args.grid, eval_points = args.eval_points, schedules = tuple(args.schedules),
        models = tuple(args.models), intervals = tuple(args.intervals), beta1 = args.beta1, seed = args.seed,
    )
    results = run_study(config, jobs = args.jobs)
    writer.write_frame(STUDY_NAME, study_table(results, config.intervals), columns = STUDY_COLUMNS)
    writer.write_frame(POINTWISE_NAME, pointwise_table(results), columns = POINTWISE_COLUMNS)

    recovery = {}
    for (schedule, model), result in results.items():
        if model == ModelKind.BNPR_PS.value:
            target = config.beta1 if schedule == "hyperproportional" else (1.0 if schedule == "proportional" else 0.0)
            coverage, median = beta1_recovery(result, target)
            recovery[schedule] = {"beta1": target, "coverage": coverage, "median": median}
    if recovery:
        writer.write_json(RECOVERY_NAME, recovery)
    print("Study table saved")
    return config.to_dict()

def load_trajectory(path: str) -> pd.DataFrame:
    df = ArtifactFrame(path, columns = SUMMARY_COLUMNS).load()
    if df is None:
        raise FileNotFoundError(f"Trajectory file {path} does not exist.")
    return df

def run_metrics(args: argparse.Namespace, writer: ArtifactWriter) -> dict:
    if not args.trajectories:
        args.subparser.error("--trajectories is required")
    summaries = [PosteriorSummary.from_frame(load_trajectory(path)) for path in args.trajectories]

    rows = [(format_interval(interval), emrw(summaries, *interval)) for interval in args.intervals]
    writer.write_frame(EMRW_NAME, pd.DataFrame(rows, columns = ["interval", "emrw"]))
    writer.write_frame(POINTWISE_EMRW_NAME, pointwise_emrw(summaries))
    if args.period is not None:
        frames = []
        for path, summary in zip(args.trajectories, summaries):
            df = seasonal_overlay(summary, args.period, bins = args.bins)
            df.insert(0, "source", path)
            frames.append(df)
        writer.write_frame(SEASONAL_NAME, pd.concat(frames, ignore_index = True))
    print("Metrics saved")
    return {"datasets": len(summaries)}

def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level = level, format = "%(asctime)s %(levelname)s %(name)s: %(message)s", force = True)

def report_error(e: Exception) -> int:
    payload = e.to_dict() if isinstance(e, PhylodynError) else {"error": type(e).__name__, "message": str(e), "detail": None}
    print(json.dumps(to_serializable(payload)), file = sys.stderr)
    return EXIT_FAILURE

def _destinations(subparser: argparse.ArgumentParser) -> set[str]:
    return {action.dest for action in subparser._actions if action.dest not in ("help", "config")}

def _multi_valued(subparser: argparse.ArgumentParser) -> set[str]:
    return {action.dest for action in subparser._actions if action.nargs in ("+", "*")}

def main(argv: list[str] = None) -> int:
    """Runs one subcommand. argparse errors exit with status 2; runtime errors return 1."""
    argv = sys.argv[1:] if argv is None else list(argv)
    parser, commands = build_parser()

    preliminary, _ = parser.parse_known_args(argv)
    subparser = commands[preliminary.command]
    if preliminary.config:
        try:
            subparser.set_defaults(**load_config(preliminary.config, allowed = _destinations(subparser), multi_valued = _multi_valued(subparser)))
        except (PhylodynError, OSError) as e:
            return report_error(e)
    args = parser.parse_args(argv)
    args.subparser = subparser
    configure_logging(args)

    parameters = {key: value for key, value in vars(args).items() if key not in ("handler", "subparser", "config")}
    try:
        writer = ArtifactWriter(args.out)
        outcome = args.handler(args, writer)
        writer.write_manifest(args.command, {**parameters, "outcome": outcome}, seed = args.seed)
    except (PhylodynError, ValueError, OSError) as e:
        logger.debug("Command failed", exc_info = True)
        return report_error(e)
    return EXIT_OK
