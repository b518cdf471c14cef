import logging

import numpy as np

from dataclasses import dataclass, asdict, field
from concurrent.futures import ProcessPoolExecutor

from phylodyn_ps.genealogy import Genealogy
from phylodyn_ps.grid_traj import LogPopTrajectory, build_grid
from phylodyn_ps.inference import ModelKind, PosteriorSummary, reconstruct
from phylodyn_ps.metrics import StudyResult, evaluation_grid
from phylodyn_ps.simulator import IntensityFn, IntensityKind, SampleSchedule
from phylodyn_ps.simulator import negative_control_intensity, sample_times, seasonal_trajectory, simulate_coalescent

logger = logging.getLogger(__name__)

# Define constants
SCHEDULES: tuple[str] = ("uniform", "proportional", "hyperproportional", "piecewise", "bm")
NEGATIVE_CONTROLS: dict[str, IntensityKind] = {
    "piecewise": IntensityKind.PIECEWISE_CONSTANT,
    "bm": IntensityKind.BM_TRAJECTORY,
}

@dataclass(frozen = True)
class StudyConfig:
    """
    Parameters of a simulation study over seasonal trajectories.

    Args:
        a (float, optional): Seasonal smoothness. Defaults to 2.
        o (float, optional): Seasonal offset. Defaults to 0.
        window (tuple[float, float], optional): Sampling window. Defaults to (0, 48).
        n (int, optional): Expected number of samples per replicate. Defaults to 200.
        replicates (int, optional): Replicates per schedule. Defaults to 50.
        grid_size (int, optional): Cells of the inference grid. Defaults to 100.
        eval_points (int, optional): k, giving k + 1 evaluation points over the window. Defaults to 300.
        schedules (tuple[str], optional): Sampling schedules. Defaults to uniform and proportional.
        models (tuple[str], optional): Models fitted to every genealogy. Defaults to both.
        intervals (tuple[tuple[float, float]], optional): Summary intervals. Defaults to (0, 6) and (6, 48).
        beta1 (float, optional): Exponent of the hyperproportional schedule. Defaults to 2.
        truth_horizon (float, optional): End of the true trajectory grid; constant beyond. Defaults to 400.
        truth_cells (int, optional): Cells of the true trajectory grid. Defaults to 4000.
        seed (int, optional): Master seed. Defaults to 7.
    """
    a: float = 2.0
    o: float = 0.0
    window: tuple = (0.0, 48.0)
    n: int = 200
    replicates: int = 50
    grid_size: int = 100
    eval_points: int = 300
    schedules: tuple = ("uniform", "proportional")
    models: tuple = (ModelKind.BNPR.value, ModelKind.BNPR_PS.value)
    intervals: tuple = ((0.0, 6.0), (6.0, 48.0))
    beta1: float = 2.0
    truth_horizon: float = 400.0
    truth_cells: int = 4000
    seed: int = 7

    def __post_init__(self) -> None:
        unknown = [name for name in self.schedules if name not in SCHEDULES]
        if unknown:
            raise ValueError(f"Unknown schedule(s) {unknown}; choose from {list(SCHEDULES)}.")
        for model in self.models:
            ModelKind(model)
        if self.replicates < 1 or self.n < 2:
            raise ValueError(f"A study needs at least one replicate and n >= 2, got {self.replicates} and {self.n}.")
        if not 0 <= self.window[0] < self.window[1] <= self.truth_horizon:
            raise ValueError(f"The window {self.window} must lie inside [0, {self.truth_horizon}].")

    def truth(self) -> LogPopTrajectory:
        return seasonal_trajectory(self.a, self.o, build_grid(0.0, self.truth_horizon, self.truth_cells))

    def eval_grid(self) -> np.ndarray:
        return evaluation_grid(self.window[0], self.window[1], self.eval_points)

    def to_dict(self) -> dict:
        return asdict(self)

@dataclass
class ReplicateOutcome:
    schedule: str
    index: int
    n: int
    summaries: dict = field(default_factory = dict)

def replicate_seed(seed: int, schedule: str, index: int) -> np.random.SeedSequence:
    """Seed stream of one replicate, fixed by (master seed, schedule, replicate index)."""
    return np.random.SeedSequence(seed, spawn_key = (SCHEDULES.index(schedule), index))

def schedule_intensity(config: StudyConfig, schedule: str, truth: LogPopTrajectory, seed: np.random.SeedSequence) -> IntensityFn:
    """The sampling intensity of a schedule, before rescaling to n expected samples."""
    if schedule == "uniform":
        return IntensityFn.constant(1.0, config.window)
    if schedule == "proportional":
        return IntensityFn.power_of_ne(1.0, 1.0, truth, config.window)
    if schedule == "hyperproportional":
        return IntensityFn.power_of_ne(1.0, config.beta1, truth, config.window)
    return negative_control_intensity(NEGATIVE_CONTROLS[schedule], seed, config.window, config.n)

def simulate_replicate(config: StudyConfig, schedule: str, index: int, truth: LogPopTrajectory = None) -> Genealogy:
    """Draws the sampling times and the genealogy of one replicate."""
    truth = config.truth() if truth is None else truth
    intensity_seed, sampling_seed, coalescent_seed = replicate_seed(config.seed, schedule, index).spawn(3)
    intensity = schedule_intensity(config, schedule, truth, intensity_seed)
    samples: SampleSchedule = sample_times(intensity, target_n = config.n, seed = sampling_seed)
    return simulate_coalescent(samples, truth, seed = coalescent_seed, s0 = config.window[1])

def run_replicate(config: StudyConfig, schedule: str, index: int) -> ReplicateOutcome:
    gen = simulate_replicate(config, schedule, index)
    outcome = ReplicateOutcome(schedule, index, gen.n)
    for model in config.models:
        summary = reconstruct(gen, model, grid_size = config.grid_size)
        outcome.summaries[model] = summary.compact()
    logger.info(f"Replicate {index} of {schedule}: {gen.n} samples, root at {gen.root_time:.4g}")
    return outcome

def run_study(config: StudyConfig, jobs: int = 1) -> dict[tuple[str, str], StudyResult]:
    """Runs every replicate of every schedule and fits every model.

    Replicates are independent; with jobs > 1 they run in a process pool and are gathered in
    (schedule, index) order, so the result does not depend on scheduling.

    Returns:
        dict[tuple[str, str], StudyResult]: Results keyed by (schedule, model).
    """
    tasks = [(schedule, index) for schedule in config.schedules for index in range(config.replicates)]
    logger.info(f"Running {len(tasks)} replicates with {jobs} job(s)")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers = jobs) as executor:
            futures = [executor.submit(run_replicate, config, schedule, index) for schedule, index in tasks]
            outcomes = [future.result() for future in futures]
    else:
        outcomes = [run_replicate(config, schedule, index) for schedule, index in tasks]

    truth = config.truth()
    eval_grid = config.eval_grid()
    results = {}
    for schedule in config.schedules:
        selected = [outcome for outcome in outcomes if outcome.schedule == schedule]
        for model in config.models:
            summaries: list[PosteriorSummary] = [outcome.summaries[model] for outcome in selected]
            results[(schedule, model)] = StudyResult([truth] * len(summaries), summaries, eval_grid)
    return results

def beta1_recovery(result: StudyResult, beta1: float) -> tuple[float, float]:
    """Fraction of 95% intervals covering beta1 and the median of the point estimates."""
    summaries = [summary for summary in result.summaries if summary.beta1_ci is not None]
    if not summaries:
        raise ValueError("No summary carries a beta1 interval.")
    covered = np.mean([summary.beta1_ci[0] <= beta1 <= summary.beta1_ci[1] for summary in summaries])
    return float(covered), float(np.median([summary.beta1_median for summary in summaries]))
