import math
import logging

import numpy as np
import pandas as pd

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

from phylodyn_ps.exceptions import GridMismatchError

logger = logging.getLogger(__name__)

# Define types
TimeType = float
NeFunctionType = Callable[[np.ndarray], np.ndarray]

# column names of the trajectory CSV
TRAJECTORY_COLUMNS: tuple[str] = ("cell_index", "midpoint_time", "gamma", "ne")

@dataclass(frozen = True)
class Grid:
    """
    Regular discretization of [t_min, t_max) into B half-open cells of width w.
    Cell j (0-based) is [t_min + j*w, t_min + (j+1)*w); the final cell is closed at t_max
    and absorbs every later time (constant extrapolation).

    Args:
        t_min (float): Left end of the grid (0 = most recent sample).
        t_max (float): Right end of the grid.
        B (int): Number of cells.
    """
    t_min: TimeType
    t_max: TimeType
    B: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)):
            raise ValueError(f"Grid bounds must be finite, got [{self.t_min}, {self.t_max}].")
        if not self.t_min < self.t_max:
            raise ValueError(f"Grid needs t_min < t_max, got [{self.t_min}, {self.t_max}].")
        if int(self.B) != self.B or self.B < 2:
            raise ValueError(f"Grid needs at least 2 cells, got B = {self.B}.")

    @property
    def w(self) -> float:
        return (self.t_max - self.t_min) / self.B

    @cached_property
    def edges(self) -> np.ndarray:
        """Cell boundaries, B + 1 values with exact end points."""
        edges = self.t_min + self.w * np.arange(self.B + 1)
        edges[-1] = self.t_max
        edges.setflags(write = False)
        return edges

    @cached_property
    def midpoints(self) -> np.ndarray:
        midpoints = self.t_min + (np.arange(self.B) + 0.5) * self.w
        midpoints.setflags(write = False)
        return midpoints

    def cell(self, t: TimeType|np.ndarray) -> int|np.ndarray:
        """Maps time(s) to 0-based cell indices; times at or beyond t_max clamp to the last cell.

        Raises:
            ValueError: If a time lies before t_min.
        """
        t = np.asarray(t, dtype = float)
        if np.any(t < self.t_min):
            raise ValueError(f"Time {t.min()} lies before the grid start {self.t_min}.")
        index = np.searchsorted(self.edges, t, side = "right") - 1
        index = np.clip(index, 0, self.B - 1)
        return int(index) if index.ndim == 0 else index

    def overlaps(self, a: TimeType, b: TimeType) -> np.ndarray:
        """Returns the overlap length of [a, b] with every cell, the last cell extending to infinity.

        Raises:
            ValueError: If a > b or a lies before t_min.
        """
        if a > b:
            raise ValueError(f"Interval end points out of order: [{a}, {b}].")
        if a < self.t_min:
            raise ValueError(f"Interval start {a} lies before the grid start {self.t_min}.")
        lo = self.edges[:-1]
        hi = self.edges[1:].copy()
        hi[-1] = np.inf
        return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)

def build_grid(t_min: TimeType, t_max: TimeType, B: int) -> Grid:
    """Builds a regular grid over [t_min, t_max) with B cells."""
    return Grid(float(t_min), float(t_max), int(B))

@dataclass(frozen = True, eq = False)
class LogPopTrajectory:
    """
    Piecewise-constant log effective population size on a grid: N(t) = exp(gamma[cell(t)]).

    Args:
        grid (Grid): The grid the trajectory lives on.
        gamma (np.ndarray): B finite log population sizes.
    """
    grid: Grid
    gamma: np.ndarray

    def __post_init__(self) -> None:
        gamma = np.array(self.gamma, dtype = float)
        if gamma.shape != (self.grid.B,):
            raise ValueError(f"Trajectory needs {self.grid.B} values, got shape {gamma.shape}.")
        if not np.all(np.isfinite(gamma)):
            raise ValueError("Trajectory values must be finite.")
        gamma.setflags(write = False)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_function(cls, grid: Grid, ne: NeFunctionType) -> "LogPopTrajectory":
        """Discretizes an effective population size function at the cell midpoints."""
        return cls(grid, np.log(ne(grid.midpoints)))

    @property
    def ne(self) -> np.ndarray:
        return np.exp(self.gamma)

    def ne_at(self, t: TimeType|np.ndarray) -> float|np.ndarray:
        """Evaluates N(t) by cell lookup."""
        return np.exp(self.gamma[self.grid.cell(t)])

    def shifted(self, delta: float) -> "LogPopTrajectory":
        return LogPopTrajectory(self.grid, self.gamma + delta)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "cell_index": np.arange(1, self.grid.B + 1),
            "midpoint_time": self.grid.midpoints,
            "gamma": self.gamma,
            "ne": self.ne,
        }, columns = list(TRAJECTORY_COLUMNS))

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "LogPopTrajectory":
        """Rebuilds a trajectory from its CSV frame. The grid is recovered from the midpoints."""
        df = df.sort_values("cell_index")
        midpoints = df["midpoint_time"].to_numpy(dtype = float)
        if len(midpoints) < 2:
            raise ValueError("A trajectory frame needs at least 2 rows.")
        w = midpoints[1] - midpoints[0]
        grid = build_grid(midpoints[0] - w / 2, midpoints[-1] + w / 2, len(midpoints))
        return cls(grid, df["gamma"].to_numpy(dtype = float))

def check_same_grid(expected: Grid, given: Grid) -> None:
    """Raises GridMismatchError unless both grids are identical."""
    if expected != given:
        raise GridMismatchError(f"Grid mismatch: {expected} vs {given}.", error = {"expected": repr(expected), "given": repr(given)})

def integrate_exp(traj: LogPopTrajectory, p: float, a: TimeType, b: TimeType) -> float:
    """Computes the integral of exp(p * gamma(t)) over [a, b] exactly for the step function.

    p = -1 gives the coalescent integrand 1/N(t), p = beta1 the sampling intensity shape N(t)^beta1.

    Args:
        traj (LogPopTrajectory): The trajectory.
        p (float): The power.
        a (float): Start of the interval.
        b (float): End of the interval.

    Raises:
        ValueError: If a > b or p is not finite.

    Returns:
        float: The integral.
    """
    if not math.isfinite(p):
        raise ValueError(f"Power must be finite, got {p}.")
    if a > b:
        raise ValueError(f"Interval end points out of order: [{a}, {b}].")
    if a == b:
        return 0.0
    # the step function with p = 0 is exactly the interval length
    if p == 0:
        return float(b - a)
    overlaps = traj.grid.overlaps(a, b)
    return float(np.dot(np.exp(p * traj.gamma), overlaps))
