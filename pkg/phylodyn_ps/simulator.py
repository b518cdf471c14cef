import logging

import numpy as np

from enum import Enum
from dataclasses import dataclass
from typing import NamedTuple

from phylodyn_ps.exceptions import SimulationError
from phylodyn_ps.genealogy import DEFAULT_TOL, Genealogy, bucket_times
from phylodyn_ps.grid_traj import Grid, LogPopTrajectory, TimeType, build_grid
from phylodyn_ps.newick import Node, Tree

logger = logging.getLogger(__name__)

# Define types
SeedType = int|np.random.SeedSequence|np.random.Generator

# seasonal trajectory family
SEASON_PERIOD: float = 12.0
SEASON_LOW: float = 10.0
SEASON_AMPLITUDE: float = 90.0

# negative controls
DEFAULT_SEGMENTS: int = 10
DEFAULT_LOG_LEVEL_RANGE: float = 2.0
DEFAULT_BM_VARIANCE: float = 1.0
DEFAULT_BM_CELLS: int = 100

def seasonal_ne(a: float, o: float, t: TimeType|np.ndarray) -> float|np.ndarray:
    """Seasonal effective population size: a logistic rise to a peak at 6 and a mirrored fall, period 12.

    Args:
        a (float): Smoothness of the logistic transitions.
        o (float): Offset choosing which part of the season t = 0 falls in.
        t (float | np.ndarray): Time(s).
    """
    phase = np.mod(np.asarray(t, dtype = float) + o, SEASON_PERIOD)
    rising = SEASON_LOW + SEASON_AMPLITUDE / (1 + np.exp(a * (3 - phase)))
    falling = SEASON_LOW + SEASON_AMPLITUDE / (1 + np.exp(a * (3 + phase - SEASON_PERIOD)))
    value = np.where(phase <= 6, rising, falling)
    return float(value) if value.ndim == 0 else value

def seasonal_trajectory(a: float, o: float, grid: Grid) -> LogPopTrajectory:
    return LogPopTrajectory.from_function(grid, lambda t: seasonal_ne(a, o, t))

class IntensityKind(str, Enum):
    CONSTANT_RATE = "constant"
    POWER_OF_NE = "power"
    PIECEWISE_CONSTANT = "piecewise"
    BM_TRAJECTORY = "bm"

@dataclass(frozen = True, eq = False)
class IntensityFn:
    """
    A sampling intensity on the window [0, s0], stored as a step function.

    Every supported kind is piecewise constant, so the levels are also the exact
    per-segment bounds used for thinning.

    Args:
        kind (IntensityKind): How the intensity was built.
        edges (np.ndarray): Segment boundaries, from 0 to s0.
        levels (np.ndarray): Non-negative intensity per segment.
    """
    kind: IntensityKind
    edges: np.ndarray
    levels: np.ndarray

    def __post_init__(self) -> None:
        edges = np.array(self.edges, dtype = float)
        levels = np.array(self.levels, dtype = float)
        if len(edges) != len(levels) + 1 or np.any(np.diff(edges) <= 0):
            raise ValueError("IntensityFn needs strictly increasing edges, one more than levels.")
        if not np.all(np.isfinite(edges)) or np.any(levels < 0) or not np.all(np.isfinite(levels)):
            raise ValueError("IntensityFn needs a finite window and finite non-negative levels.")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "levels", levels)

    @property
    def window(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    def __call__(self, t: TimeType|np.ndarray) -> np.ndarray:
        index = np.clip(np.searchsorted(self.edges, t, side = "right") - 1, 0, len(self.levels) - 1)
        return self.levels[index]

    def integral(self) -> float:
        return float(np.dot(self.levels, np.diff(self.edges)))

    def rescaled(self, target: float) -> "IntensityFn":
        """Scales the levels so the intensity integrates to `target` over the window."""
        total = self.integral()
        if total <= 0:
            raise SimulationError(f"Cannot rescale a zero intensity to {target} expected events.")
        return IntensityFn(self.kind, self.edges, self.levels * (target / total))

    @classmethod
    def constant(cls, rate: float, window: tuple[float, float]) -> "IntensityFn":
        return cls(IntensityKind.CONSTANT_RATE, np.array(window, dtype = float), np.array([rate]))

    @classmethod
    def power_of_ne(cls, beta0: float, beta1: float, traj: LogPopTrajectory, window: tuple[float, float]) -> "IntensityFn":
        """beta0 * N(t)^beta1 on the window, N taken from the trajectory cells (constant beyond its end)."""
        lo, hi = window
        inner = traj.grid.edges[(traj.grid.edges > lo) & (traj.grid.edges < hi)]
        edges = np.concatenate([[lo], inner, [hi]])
        levels = beta0 * np.exp(beta1 * traj.gamma[traj.grid.cell(edges[:-1])])
        return cls(IntensityKind.POWER_OF_NE, edges, levels)

class SampleSchedule(NamedTuple):
    """Distinct sampling times (ascending) with multiplicities."""
    times: np.ndarray
    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

def sample_times(
    intensity: IntensityFn,
    target_n: int = None,
    seed: SeedType = None,
    fixed_count: bool = False,
    method: str = "thinning",
    tol: float = DEFAULT_TOL,
) -> SampleSchedule:
    """Simulates sampling times from an inhomogeneous Poisson process on the intensity window.

    Args:
        intensity (IntensityFn): The intensity.
        target_n (int, optional): Expected number of events; the intensity is rescaled to
            integrate to it. None uses the intensity as given. Defaults to None.
        seed (SeedType, optional): Seed, SeedSequence or Generator. Defaults to None.
        fixed_count (bool, optional): Draw exactly target_n times with density proportional to
            the intensity instead of a Poisson count. Defaults to False.
        method (str, optional): "thinning" (against the per-segment bound) or "rescaling"
            (inverting the cumulative intensity). Defaults to "thinning".
        tol (float, optional): Coincident times within tol are merged. Defaults to 1e-6.

    Raises:
        SimulationError: Zero total intensity with a positive target.

    Returns:
        SampleSchedule: Sorted distinct times with multiplicities.
    """
    rng = np.random.default_rng(seed)
    total = intensity.integral()
    if target_n is not None:
        if total <= 0:
            if target_n > 0:
                raise SimulationError(f"Zero total intensity cannot produce {target_n} expected samples.")
            return SampleSchedule(np.array([]), np.array([], dtype = int))
        intensity = intensity.rescaled(target_n)
    elif total <= 0:
        return SampleSchedule(np.array([]), np.array([], dtype = int))

    if fixed_count:
        if target_n is None:
            raise ValueError("fixed_count needs target_n.")
        times = _invert_cumulative(intensity, rng.uniform(0, intensity.integral(), size = int(target_n)))
    elif method == "thinning":
        times = _thinning(intensity, rng)
    elif method == "rescaling":
        times = _rescaling(intensity, rng)
    else:
        raise ValueError(f"Unknown sampling method {method!r}.")

    bucket, counts = bucket_times(times, tol)
    return SampleSchedule(bucket, counts)

def _thinning(intensity: IntensityFn, rng: np.random.Generator) -> np.ndarray:
    accepted = []
    for lower, upper, bound in zip(intensity.edges[:-1], intensity.edges[1:], intensity.levels):
        if bound <= 0:
            continue
        candidates = rng.uniform(lower, upper, size = rng.poisson(bound * (upper - lower)))
        keep = rng.uniform(size = len(candidates)) * bound <= intensity(candidates)
        accepted.append(candidates[keep])
    return np.sort(np.concatenate(accepted)) if accepted else np.array([])

def _rescaling(intensity: IntensityFn, rng: np.random.Generator) -> np.ndarray:
    total = intensity.integral()
    arrivals = []
    current = rng.exponential()
    while current < total:
        arrivals.append(current)
        current += rng.exponential()
    return _invert_cumulative(intensity, np.array(arrivals))

def _invert_cumulative(intensity: IntensityFn, targets: np.ndarray) -> np.ndarray:
    """Maps cumulative-intensity values back to times."""
    cumulative = np.concatenate([[0.0], np.cumsum(intensity.levels * np.diff(intensity.edges))])
    targets = np.sort(np.asarray(targets, dtype = float))
    # segments of zero intensity never receive an event
    index = np.clip(np.searchsorted(cumulative, targets, side = "right") - 1, 0, len(intensity.levels) - 1)
    levels = intensity.levels[index]
    safe = np.where(levels > 0, levels, 1.0)
    times = intensity.edges[index] + (targets - cumulative[index]) / safe
    return np.minimum(times, intensity.edges[index + 1])

def negative_control_intensity(
    kind: IntensityKind|str,
    seed: SeedType,
    window: tuple[float, float],
    target_n: int,
    segments: int = DEFAULT_SEGMENTS,
    log_level_range: float = DEFAULT_LOG_LEVEL_RANGE,
    bm_variance: float = DEFAULT_BM_VARIANCE,
    bm_cells: int = DEFAULT_BM_CELLS,
) -> IntensityFn:
    """Random sampling intensities independent of any population trajectory.

    `piecewise`: `segments` pieces at uniform random breakpoints with log-uniform levels in
    exp(+-log_level_range). `bm`: exponentiated Brownian motion on `bm_cells` cells with step
    variance bm_variance * w. Both are rescaled to integrate to target_n.
    """
    kind = IntensityKind(kind)
    rng = np.random.default_rng(seed)
    lo, hi = float(window[0]), float(window[1])
    if not lo < hi:
        raise ValueError(f"Window must be non-empty, got {window}.")

    if kind == IntensityKind.PIECEWISE_CONSTANT:
        breaks = np.sort(rng.uniform(lo, hi, size = segments - 1))
        edges = np.concatenate([[lo], breaks, [hi]])
        levels = np.exp(rng.uniform(-log_level_range, log_level_range, size = segments))
    elif kind == IntensityKind.BM_TRAJECTORY:
        grid = build_grid(lo, hi, bm_cells)
        steps = rng.normal(0.0, np.sqrt(bm_variance * grid.w), size = bm_cells)
        steps[0] = 0.0
        edges = grid.edges
        levels = np.exp(np.cumsum(steps))
    else:
        raise ValueError(f"{kind.value!r} is not a negative-control intensity.")

    return IntensityFn(kind, edges, levels).rescaled(target_n)

def simulate_coalescent(samples: SampleSchedule, traj: LogPopTrajectory, seed: SeedType = None, s0: TimeType = None) -> Genealogy:
    """Simulates a heterochronous coalescent genealogy under a piecewise-constant trajectory.

    Moving back in time, the next coalescence is found by inverting the cumulative hazard
    A(A-1)/2 / N(t) against a unit exponential; sampling events add lineages. The merging pair
    is chosen uniformly, so the result carries a random binary tree.

    Args:
        samples (SampleSchedule): Sampling times and multiplicities.
        traj (LogPopTrajectory): The population trajectory (constant beyond its grid).
        seed (SeedType, optional): Seed, SeedSequence or Generator. Defaults to None.
        s0 (float, optional): Sampling window end. Defaults to the oldest sampling time.

    Raises:
        SimulationError: Fewer than 2 tips.

    Returns:
        Genealogy: The simulated genealogy with its tree attached.
    """
    rng = np.random.default_rng(seed)
    times = np.asarray(samples.times, dtype = float)
    counts = np.asarray(samples.counts, dtype = int)
    if counts.sum() < 2:
        raise SimulationError(f"A genealogy needs at least 2 tips, got {counts.sum()}.")

    grid = traj.grid
    # cumulative integral of 1/N(t) at the cell edges
    cumulative = np.concatenate([[0.0], np.cumsum(np.exp(-traj.gamma) * np.diff(grid.edges))])
    last_rate = float(np.exp(-traj.gamma[-1]))

    def inverse_time(start: float, pressure: float) -> float:
        """Time t with integral of 1/N from start to t equal to pressure."""
        target = _cumulative_at(start, grid, traj.gamma, cumulative, last_rate) + pressure
        if target >= cumulative[-1]:
            return grid.t_max + (target - cumulative[-1]) / last_rate
        index = int(np.searchsorted(cumulative, target, side = "right") - 1)
        return float(grid.edges[index] + (target - cumulative[index]) * np.exp(traj.gamma[index]))

    lineages: list[tuple[Node, float]] = []
    coal_times: list[float] = []
    label = 0
    current = float(times[0])
    next_sample = 0

    while next_sample < len(times) or len(lineages) > 1:
        upcoming = times[next_sample] if next_sample < len(times) else np.inf
        active = len(lineages)
        if active >= 2:
            rate = active * (active - 1) / 2
            proposal = inverse_time(current, rng.exponential() / rate)
            if proposal < upcoming:
                first, second = rng.choice(active, size = 2, replace = False)
                parent = Node()
                for index in sorted((first, second), reverse = True):
                    child, born = lineages.pop(index)
                    child.branch_length = proposal - born
                    parent.add_child(child)
                lineages.append((parent, proposal))
                coal_times.append(proposal)
                current = proposal
                continue
        # absorb the next sampling event
        current = float(upcoming)
        for _ in range(int(counts[next_sample])):
            label += 1
            lineages.append((Node(label = f"t{label}"), current))
        next_sample += 1

    root = lineages[0][0]
    tree = Tree(root)
    s0 = float(times[-1]) if s0 is None else float(s0)
    logger.debug(f"Simulated genealogy with {counts.sum()} tips, root at {coal_times[-1]:.4g}")
    return Genealogy(times, counts, np.array(coal_times), s0 = s0, tree = tree)

def _cumulative_at(t: float, grid: Grid, gamma: np.ndarray, cumulative: np.ndarray, last_rate: float) -> float:
    if t >= grid.t_max:
        return float(cumulative[-1] + (t - grid.t_max) * last_rate)
    index = grid.cell(t)
    return float(cumulative[index] + (t - grid.edges[index]) * np.exp(-gamma[index]))

def simulated_tip_times(gen: Genealogy) -> dict[str, float]:
    """Tip times by label of a simulated genealogy, for the Newick sidecar."""
    if gen.tree is None:
        raise SimulationError("The genealogy carries no tree.")
    result: dict[str, float] = {}
    depth_max = max(tip.depth for tip in gen.tree.tips())
    for tip in gen.tree.tips():
        result[tip.label] = depth_max - tip.depth + float(gen.samp_times[0])
    return result
