import logging

import numpy as np
import pandas as pd

from dataclasses import dataclass
from typing import NamedTuple
from scipy.integrate import trapezoid

from phylodyn_ps.grid_traj import TimeType
from phylodyn_ps.inference import PosteriorSummary

logger = logging.getLogger(__name__)

# Define constants
STUDY_COLUMNS: tuple[str] = ("schedule", "model", "interval", "MRD", "MRW", "ME")
POINTWISE_COLUMNS: tuple[str] = ("schedule", "model", "time", "mpmedian", "mre", "mrw")
SEASON_COLUMNS: tuple[str] = ("phase", "median", "q025", "q975", "count")

# Define types
IntervalType = tuple[float, float]

def evaluation_grid(t_min: TimeType, t_max: TimeType, k: int) -> np.ndarray:
    """The k + 1 evenly spaced evaluation points t_0..t_k."""
    if k < 1 or not t_min < t_max:
        raise ValueError(f"An evaluation grid needs k >= 1 and t_min < t_max, got k = {k}, [{t_min}, {t_max}].")
    return np.linspace(t_min, t_max, k + 1)

def format_interval(interval: IntervalType) -> str:
    return f"({interval[0]:g},{interval[1]:g})"

@dataclass(frozen = True, eq = False)
class StudyResult:
    """
    The replicate ensemble of one (schedule, model) cell of a simulation study.

    Truths and posterior summaries are step functions; both are read on the evaluation grid by
    nearest-cell lookup.

    Args:
        truths (list[LogPopTrajectory]): True trajectory per replicate.
        summaries (list[PosteriorSummary]): Posterior summary per replicate.
        eval_grid (np.ndarray): Evaluation points t_0..t_k, ascending.
    """
    truths: list
    summaries: list
    eval_grid: np.ndarray

    def __post_init__(self) -> None:
        if len(self.truths) != len(self.summaries):
            raise ValueError(f"{len(self.truths)} truths for {len(self.summaries)} summaries.")
        eval_grid = np.array(self.eval_grid, dtype = float)
        if eval_grid.ndim != 1 or len(eval_grid) < 1 or np.any(np.diff(eval_grid) <= 0):
            raise ValueError("The evaluation grid must be a non-empty strictly increasing sequence.")
        object.__setattr__(self, "eval_grid", eval_grid)

    @property
    def r(self) -> int:
        return len(self.summaries)

    def aligned(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(truth, median, q025, q975) on the evaluation grid, each of shape (r, k + 1)."""
        if not self.summaries:
            raise ValueError("The study has no replicates.")
        truth = np.vstack([traj.ne_at(self.eval_grid) for traj in self.truths])
        median, lower, upper = (np.vstack(parts) for parts in zip(*(summary.ne_at(self.eval_grid) for summary in self.summaries)))
        return truth, median, lower, upper

class IntervalStats(NamedTuple):
    mrd: float
    mrw: float
    me: float

class PointwiseStats(NamedTuple):
    time: np.ndarray
    mpmedian: np.ndarray
    mre: np.ndarray
    mrw: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self._asdict())

def _interval_mask(eval_grid: np.ndarray, a: TimeType, b: TimeType) -> np.ndarray:
    if not a < b:
        raise ValueError(f"Interval end points must satisfy a < b, got ({a}, {b}).")
    mask = (eval_grid >= a) & (eval_grid <= b)
    if not mask.any():
        raise ValueError(f"No evaluation point lies in [{a}, {b}].")
    return mask

def _interval_mean(values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Trapezoid integral over the points divided by their span; one point gives its value."""
    if len(points) == 1:
        return values[..., 0]
    return trapezoid(values, points, axis = -1) / (points[-1] - points[0])

def interval_stats(res: StudyResult, a: TimeType, b: TimeType) -> IntervalStats:
    """Mean relative deviation, mean relative width and mean envelope on [a, b].

    Raises:
        ValueError: Without replicates, with a >= b or when no evaluation point lies in [a, b].
    """
    mask = _interval_mask(res.eval_grid, a, b)
    truth, median, lower, upper = (values[:, mask] for values in res.aligned())
    points = res.eval_grid[mask]

    mrd = _interval_mean(np.abs(median - truth) / truth, points).mean()
    mrw = _interval_mean((upper - lower) / truth, points).mean()
    me = np.mean((lower <= truth) & (truth <= upper))
    return IntervalStats(float(mrd), float(mrw), float(me))

def pointwise_stats(res: StudyResult) -> PointwiseStats:
    """Mean posterior median, signed mean relative error and mean relative width per evaluation point."""
    truth, median, lower, upper = res.aligned()
    return PointwiseStats(
        time = res.eval_grid,
        mpmedian = median.mean(axis = 0),
        mre = ((median - truth) / truth).mean(axis = 0),
        mrw = ((upper - lower) / truth).mean(axis = 0),
    )

def _summary_eval_grid(summaries: list[PosteriorSummary], eval_grid: np.ndarray = None) -> np.ndarray:
    if not summaries:
        raise ValueError("No posterior summaries given.")
    return summaries[0].grid.edges if eval_grid is None else np.asarray(eval_grid, dtype = float)

def _relative_widths(summaries: list[PosteriorSummary], points: np.ndarray) -> np.ndarray:
    rows = []
    for summary in summaries:
        median, lower, upper = summary.ne_at(points)
        rows.append((upper - lower) / median)
    return np.vstack(rows)

def emrw(summaries: list[PosteriorSummary], a: TimeType, b: TimeType, eval_grid: np.ndarray = None) -> float:
    """Empirical mean relative width on [a, b]: the credible-interval width relative to the posterior median.

    Args:
        summaries (list[PosteriorSummary]): One summary per dataset.
        a (float): Interval start.
        b (float): Interval end.
        eval_grid (np.ndarray, optional): Evaluation points. Defaults to the cell edges of the first summary.
    """
    eval_grid = _summary_eval_grid(summaries, eval_grid)
    mask = _interval_mask(eval_grid, a, b)
    points = eval_grid[mask]
    return float(_interval_mean(_relative_widths(summaries, points), points).mean())

def pointwise_emrw(summaries: list[PosteriorSummary], eval_grid: np.ndarray = None) -> pd.DataFrame:
    eval_grid = _summary_eval_grid(summaries, eval_grid)
    return pd.DataFrame({"time": eval_grid, "emrw": _relative_widths(summaries, eval_grid).mean(axis = 0)})

def seasonal_overlay(summary: PosteriorSummary, period: float, bins: int = 12) -> pd.DataFrame:
    """Folds a reconstruction onto one period and averages the cell summaries per phase bin.

    Args:
        summary (PosteriorSummary): The reconstruction.
        period (float): Season length in the time unit of the grid.
        bins (int, optional): Number of phase bins. Defaults to 12.

    Returns:
        pd.DataFrame: Columns phase (bin centre), median, q025, q975 and count; empty bins are dropped.
    """
    if period <= 0 or bins < 1:
        raise ValueError(f"Need a positive period and at least one bin, got {period} and {bins}.")
    phase = np.mod(summary.grid.midpoints, period)
    index = np.minimum((phase / period * bins).astype(int), bins - 1)
    df = pd.DataFrame({
        "bin": index,
        "median": summary.ne_median,
        "q025": summary.ne_q025,
        "q975": summary.ne_q975,
    })
    grouped = df.groupby("bin")
    overlay = grouped[["median", "q025", "q975"]].mean()
    overlay["count"] = grouped.size()
    overlay["phase"] = (overlay.index.to_numpy() + 0.5) * period / bins
    return overlay.reset_index(drop = True)[list(SEASON_COLUMNS)]

def study_table(results: dict[tuple[str, str], StudyResult], intervals: list[IntervalType]) -> pd.DataFrame:
    """One row per (schedule, model, interval) with MRD, MRW and ME.

    Args:
        results (dict[tuple[str, str], StudyResult]): Results keyed by (schedule, model).
        intervals (list[IntervalType]): Intervals (a, b).
    """
    rows = []
    for (schedule, model), res in results.items():
        for a, b in intervals:
            stats = interval_stats(res, a, b)
            rows.append((schedule, model, format_interval((a, b)), stats.mrd, stats.mrw, stats.me))
            logger.info(f"{schedule}/{model} on {format_interval((a, b))}: MRD {stats.mrd:.4g}, MRW {stats.mrw:.4g}, ME {stats.me:.4g}")
    return pd.DataFrame(rows, columns = list(STUDY_COLUMNS))

def pointwise_table(results: dict[tuple[str, str], StudyResult]) -> pd.DataFrame:
    frames = []
    for (schedule, model), res in results.items():
        df = pointwise_stats(res).to_frame()
        df.insert(0, "model", model)
        df.insert(0, "schedule", schedule)
        frames.append(df)
    if not frames:
        return pd.DataFrame(columns = list(POINTWISE_COLUMNS))
    return pd.concat(frames, ignore_index = True)[list(POINTWISE_COLUMNS)]
