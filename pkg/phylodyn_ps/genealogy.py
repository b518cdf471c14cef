import logging

import numpy as np
import pandas as pd

from dataclasses import dataclass, field

from phylodyn_ps.exceptions import GenealogyError
from phylodyn_ps.grid_traj import Grid, TimeType, build_grid
from phylodyn_ps.newick import Tree, Node

logger = logging.getLogger(__name__)

# Define constants
DEFAULT_TOL: float = 1e-6

# column names of the interval dump
INTERVAL_COLUMNS: tuple[str] = ("cell_index", "cell_start", "cell_end", "E", "d", "c", "w_samp")

@dataclass(frozen = True, eq = False)
class Genealogy:
    """
    Sufficient statistics of a dated genealogy.

    Times run backwards from the most recent sample. Sampling events are stored ascending
    (the most recent one first) with their multiplicities, coalescent times ascending.

    Args:
        samp_times (np.ndarray): Distinct sampling times, ascending.
        samp_counts (np.ndarray): Number of tips sampled at each sampling time.
        coal_times (np.ndarray): The n - 1 coalescent times, ascending.
        s0 (float, optional): Right end point of the sampling window. Defaults to the oldest sampling time.
        tree (Tree, optional): The tree the events were taken from, if any.
    """
    samp_times: np.ndarray
    samp_counts: np.ndarray
    coal_times: np.ndarray
    s0: TimeType = None
    tree: Tree = field(default = None, repr = False)

    def __post_init__(self) -> None:
        samp_times = np.array(self.samp_times, dtype = float).reshape(-1)
        samp_counts = np.array(self.samp_counts, dtype = int).reshape(-1)
        coal_times = np.array(self.coal_times, dtype = float).reshape(-1)
        if samp_times.shape != samp_counts.shape:
            raise ValueError("Sampling times and multiplicities differ in length.")
        for values in (samp_times, samp_counts, coal_times):
            values.setflags(write = False)
        object.__setattr__(self, "samp_times", samp_times)
        object.__setattr__(self, "samp_counts", samp_counts)
        object.__setattr__(self, "coal_times", coal_times)
        s0 = float(samp_times.max()) if self.s0 is None and len(samp_times) else self.s0
        object.__setattr__(self, "s0", None if s0 is None else float(s0))
        self.validate()

    @property
    def n(self) -> int:
        return int(self.samp_counts.sum())

    @property
    def m(self) -> int:
        return len(self.samp_times)

    @property
    def root_time(self) -> float:
        return float(self.coal_times[-1])

    def validate(self) -> None:
        """Checks the binary coalescent structure by walking the merged events.

        Raises:
            GenealogyError: If the event counts or the active-lineage counts are inconsistent.
        """
        if self.n < 2:
            raise GenealogyError(f"A genealogy needs at least 2 tips, got {self.n}.")
        if np.any(self.samp_counts < 1):
            raise GenealogyError("Sampling multiplicities must be positive.")
        if not np.all(np.isfinite(self.samp_times)) or not np.all(np.isfinite(self.coal_times)):
            raise GenealogyError("Event times must be finite.")
        if np.any(np.diff(self.samp_times) <= 0):
            raise GenealogyError("Sampling times must be distinct and ascending.")
        if np.any(np.diff(self.coal_times) < 0):
            raise GenealogyError("Coalescent times must be ascending.")
        if self.samp_times[0] < 0:
            raise GenealogyError(f"Sampling times must be non-negative, got {self.samp_times[0]}.")
        if len(self.coal_times) != self.n - 1:
            raise GenealogyError(f"Expected {self.n - 1} coalescent events for {self.n} tips, got {len(self.coal_times)}.")
        if self.s0 < self.samp_times[-1]:
            raise GenealogyError(f"Sampling window end s0 = {self.s0} precedes the oldest sample {self.samp_times[-1]}.")
        active = 0
        for time, delta in merged_events(self):
            if delta < 0 and active < 2:
                raise GenealogyError(f"Coalescent event at {time} with only {active} active lineage(s).", error = {"time": time})
            active += delta
        if active != 1:
            raise GenealogyError(f"The genealogy ends with {active} lineages instead of a single root.")

    def default_grid(self, B: int) -> Grid:
        """A grid over [0, max(root time, s0)] with B cells."""
        return build_grid(0.0, max(self.root_time, self.s0), B)

def merged_events(gen: Genealogy) -> list[tuple[float, int]]:
    """Returns all events as (time, lineage change), ascending; sampling precedes coalescence at ties."""
    events = [(float(t), int(k), 0) for t, k in zip(gen.samp_times, gen.samp_counts)]
    events += [(float(t), -1, 1) for t in gen.coal_times]
    events.sort(key = lambda e: (e[0], e[2]))
    return [(time, delta) for time, delta, _ in events]

def bucket_times(times: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Merges ascending-sorted times that lie within `tol` of the first time of their bucket.

    Returns:
        tuple[np.ndarray, np.ndarray]: Bucket times (the earliest member) and multiplicities.
    """
    times = np.sort(np.asarray(times, dtype = float))
    bucket_starts: list[float] = []
    counts: list[int] = []
    for t in times:
        if bucket_starts and t - bucket_starts[-1] <= tol:
            counts[-1] += 1
        else:
            bucket_starts.append(float(t))
            counts.append(1)
    return np.array(bucket_starts), np.array(counts, dtype = int)

def read_sidecar(path: str, forward: bool = False) -> dict[str, float]:
    """Reads a `label<TAB>time` sidecar file.

    Args:
        path (str): Path of the TSV file (no header).
        forward (bool, optional): Times are forward (calendar) times; they are converted to
            backward times measured from the most recent one. Defaults to False.

    Returns:
        dict[str, float]: Backward time per tip label.
    """
    df = pd.read_csv(path, sep = "\t", header = None, names = ["label", "time"], dtype = {"label": str, "time": float}, comment = "#")
    if df["label"].duplicated().any():
        raise GenealogyError(f"Duplicate labels in sidecar {path}.")
    times = df["time"].to_numpy(dtype = float)
    if forward:
        times = times.max() - times
    return dict(zip(df["label"], times))

def write_sidecar(path: str, tip_times: dict[str, float]) -> None:
    df = pd.DataFrame({"label": list(tip_times.keys()), "time": list(tip_times.values())})
    df.to_csv(path, sep = "\t", header = False, index = False, float_format = "%.12g")

def node_times(tree: Tree) -> dict[int, float]:
    """Backward time of every node: (max tip depth) - (node depth)."""
    max_depth = max(tip.depth for tip in tree.tips())
    return {id(node): max_depth - node.depth for node in tree.preorder()}

def tip_times(tree: Tree) -> dict[str, float]:
    times = node_times(tree)
    return {tip.label: times[id(tip)] for tip in tree.tips()}

def extract_events(tree: Tree, tol: float = DEFAULT_TOL, s0: TimeType = None, sidecar: dict[str, float] = None) -> Genealogy:
    """Extracts sampling and coalescent times from a dated tree.

    Node times come from the tree geometry so that the deepest tip sits at time 0, or at the
    most recent sidecar time when a sidecar is given. Tips whose times differ by at most `tol`
    share one sampling event.

    Args:
        tree (Tree): A tree from parse_newick.
        tol (float, optional): Merging tolerance for sampling times. Defaults to 1e-6.
        s0 (float, optional): Sampling window end point. Defaults to the oldest sampling time.
        sidecar (dict[str, float], optional): Tip times by label; checked against the
            geometry within `tol` and used in its place. Defaults to None.

    Raises:
        GenealogyError: Fewer than 2 tips, tied coalescent times, or a sidecar inconsistent with the tree.

    Returns:
        Genealogy: The event lists.
    """
    tips = tree.tips()
    if len(tips) < 2:
        raise GenealogyError(f"A genealogy needs at least 2 tips, got {len(tips)}.")

    times = node_times(tree)
    tip_values = np.array([times[id(tip)] for tip in tips])
    origin = 0.0
    if sidecar is not None:
        tip_values, origin = _apply_sidecar(tips, tip_values, sidecar, tol)

    coal_times = np.sort(np.array([times[id(node)] for node in tree.internal_nodes()])) + origin
    ties = np.flatnonzero(np.diff(coal_times) <= tol)
    if len(ties):
        raise GenealogyError(f"Coalescent times tie within tol = {tol} at {coal_times[ties[0]]}; only binary mergers at distinct times are supported.", error = {"time": float(coal_times[ties[0]])})

    samp_times, samp_counts = bucket_times(tip_values, tol)
    logger.info(f"Extracted {len(tips)} tips in {len(samp_times)} sampling events and {len(coal_times)} coalescent events")
    return Genealogy(samp_times, samp_counts, coal_times, s0 = s0, tree = tree)

def _apply_sidecar(tips: list[Node], geometry: np.ndarray, sidecar: dict[str, float], tol: float) -> tuple[np.ndarray, float]:
    """Sidecar tip times checked against the geometry, and the sidecar origin (its most recent time)."""
    missing = [tip.label for tip in tips if tip.label not in sidecar]
    if missing:
        raise GenealogyError(f"Sidecar lacks times for {len(missing)} tip(s), e.g. {missing[0]!r}.")
    given = np.array([sidecar[tip.label] for tip in tips], dtype = float)
    # the sidecar may be measured from another origin
    origin = float(given.min())
    given = given - origin
    worst = int(np.argmax(np.abs(given - geometry)))
    if abs(given[worst] - geometry[worst]) > tol:
        raise GenealogyError(
            f"Sidecar time {given[worst]} for {tips[worst].label!r} disagrees with tree geometry {geometry[worst]} beyond tol = {tol}.",
            error = {"label": tips[worst].label},
        )
    return given + origin, origin

@dataclass(frozen = True, eq = False)
class IntervalData:
    """
    Per-cell sufficient statistics of a genealogy on a grid.

    Args:
        grid (Grid): The grid.
        E (np.ndarray): Coalescent pressure, sum of C = A(A-1)/2 times overlap length per cell.
        d (np.ndarray): Coalescent events per cell.
        c (np.ndarray): Sampled tips per cell.
        w_samp (np.ndarray): Overlap length of the sampling window [0, s0] with each cell.
    """
    grid: Grid
    E: np.ndarray
    d: np.ndarray
    c: np.ndarray
    w_samp: np.ndarray

    def __post_init__(self) -> None:
        for name in ("E", "d", "c", "w_samp"):
            values = np.array(getattr(self, name), dtype = float)
            if values.shape != (self.grid.B,):
                raise ValueError(f"IntervalData.{name} needs {self.grid.B} values, got shape {values.shape}.")
            values.setflags(write = False)
            object.__setattr__(self, name, values)

    @property
    def n(self) -> int:
        return int(round(self.c.sum()))

    @property
    def s0(self) -> float:
        return float(self.w_samp.sum())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "cell_index": np.arange(1, self.grid.B + 1),
            "cell_start": self.grid.edges[:-1],
            "cell_end": self.grid.edges[1:],
            "E": self.E,
            "d": self.d,
            "c": self.c,
            "w_samp": self.w_samp,
        }, columns = list(INTERVAL_COLUMNS))

def decompose_intervals(gen: Genealogy, grid: Grid) -> IntervalData:
    """Decomposes a genealogy into per-cell sufficient statistics for both likelihoods.

    Walks the merged events keeping the active-lineage count A; each inter-event segment
    adds A(A-1)/2 times its overlap with each cell to E.

    Raises:
        GenealogyError: If a positive-length segment before the root has no active lineage
            or a coalescent event finds fewer than 2 lineages.
    """
    E = np.zeros(grid.B)
    d = np.zeros(grid.B)
    c = np.zeros(grid.B)

    active = 0
    previous = float(gen.samp_times[0])
    for time, delta in merged_events(gen):
        if time > previous:
            if active < 1:
                raise GenealogyError(f"No active lineage on ({previous}, {time}) before the root.")
            if active >= 2:
                E += active * (active - 1) / 2 * grid.overlaps(previous, time)
            previous = time
        if delta < 0:
            if active < 2:
                raise GenealogyError(f"Coalescent event at {time} with only {active} active lineage(s).")
            d[grid.cell(time)] += 1
        else:
            c[grid.cell(time)] += delta
        active += delta

    w_samp = grid.overlaps(0.0, gen.s0)
    logger.debug(f"Decomposed genealogy of {gen.n} tips on {grid.B} cells, total pressure {E.sum()}")
    return IntervalData(grid, E, d, c, w_samp)

def total_pressure(gen: Genealogy) -> float:
    """Sum over inter-event segments of A(A-1)/2 times the segment length, without a grid."""
    total = 0.0
    active = 0
    previous = float(gen.samp_times[0])
    for time, delta in merged_events(gen):
        total += active * (active - 1) / 2 * (time - previous)
        previous = time
        active += delta
    return total
