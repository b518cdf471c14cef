import math
import logging
import itertools

import numpy as np
import pandas as pd

from enum import Enum
from typing import Protocol
from dataclasses import dataclass, field, replace

from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.special import logsumexp
from scipy.stats import norm

from phylodyn_ps.coal_lik import coal_loglik, coal_grad_hess
from phylodyn_ps.exceptions import ConvergenceError, DegenerateDataError
from phylodyn_ps.genealogy import Genealogy, IntervalData, decompose_intervals
from phylodyn_ps.grid_traj import Grid, LogPopTrajectory, TimeType, build_grid, check_same_grid
from phylodyn_ps.prior import Hyperparams, rw1_log_density, rw1_precision_apply, rw1_structure, log_hyperprior_z
from phylodyn_ps.samp_lik import SamplingParams, samp_loglik, samp_grad_hess
from phylodyn_ps.tridiag import TridiagCholesky

logger = logging.getLogger(__name__)

# Newton-Raphson settings
NEWTON_TOL: float = 1e-8
MAX_NEWTON_ITER: int = 100
MAX_HALVINGS: int = 30
EXIT_GRADIENT_TOL: float = 1e-6

# hyperparameter search and integration grid
OPTIMIZER_XTOL: float = 1e-4
OPTIMIZER_MAX_EVAL: int = 500
GRID_STEP: float = 0.75
GRID_HALF_WIDTH: int = 3
PRUNE_DELTA: float = 10.0
LOG_TAU_BOUNDS: tuple[float, float] = (-12.0, 12.0)
HESSIAN_STEP: float = 0.05
STANDARDIZED_HESSIAN_STEP: float = 0.5

# marginal quantiles
QUANTILES: tuple[float, float, float] = (0.025, 0.5, 0.975)
SUMMARY_COLUMNS: tuple[str] = ("time", "median", "q025", "q975")
BISECTION_TOL: float = 1e-10
MAX_BISECTIONS: int = 200

# Define types
AxisName = str
AXES_BNPR: tuple[AxisName] = ("log_tau",)
AXES_BNPR_PS: tuple[AxisName] = ("log_tau", "log_beta0", "beta1")
FIXABLE: tuple[str] = ("tau", "beta0", "beta1")

class ModelKind(str, Enum):
    BNPR = "bnpr"
    BNPR_PS = "bnpr-ps"

class LikelihoodTerm(Protocol):
    """Any log-likelihood in gamma with a diagonal Hessian."""

    def loglik(self, gamma: np.ndarray) -> float: ...

    def grad_hess(self, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...

class GaussianLikelihood:
    """
    Independent Gaussian log-likelihood in gamma, normalizing constants included.
    Replaces the data likelihoods when the Laplace approximation must be exact.

    Args:
        mean (np.ndarray): Per-cell means.
        prec (np.ndarray): Per-cell precisions.
    """

    def __init__(self, mean: np.ndarray, prec: np.ndarray) -> None:
        self.mean = np.asarray(mean, dtype = float)
        self.prec = np.asarray(prec, dtype = float)
        if self.mean.shape != self.prec.shape or np.any(self.prec <= 0):
            raise ValueError("GaussianLikelihood needs matching means and positive precisions.")

    def loglik(self, gamma: np.ndarray) -> float:
        resid = gamma - self.mean
        return float(0.5 * np.sum(np.log(self.prec / (2 * math.pi))) - 0.5 * np.dot(self.prec, resid ** 2))

    def grad_hess(self, gamma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return -self.prec * (gamma - self.mean), -self.prec.copy()

@dataclass(frozen = True, eq = False)
class ModelSpec:
    """
    One of the two posteriors: coalescent likelihood only (BNPR) or coalescent plus
    sampling-time likelihood (BNPR-PS).

    Args:
        kind (ModelKind): Which posterior.
        data (IntervalData): Per-cell sufficient statistics; may be None with a replacement likelihood.
        grid (Grid): The grid. Defaults to the data grid.
        fixed (dict[str, float], optional): Hyperparameters pinned on the natural scale
            (`tau`, `beta0`, `beta1`); pinned axes are neither optimized nor integrated.
        replacement (LikelihoodTerm, optional): Replaces the data likelihoods.
    """
    kind: ModelKind
    data: IntervalData = None
    grid: Grid = None
    fixed: dict = field(default_factory = dict)
    replacement: LikelihoodTerm = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.grid is None:
            if self.data is None:
                raise ValueError("ModelSpec needs a grid or interval data.")
            object.__setattr__(self, "grid", self.data.grid)
        if self.data is not None:
            check_same_grid(self.grid, self.data.grid)
        elif self.replacement is None:
            raise ValueError("ModelSpec needs interval data or a replacement likelihood.")
        unknown = set(self.fixed) - set(FIXABLE)
        if unknown:
            raise ValueError(f"Unknown fixed hyperparameter(s): {sorted(unknown)}.")
        if self.kind == ModelKind.BNPR_PS and self.replacement is None:
            if self.data.c.sum() <= 0 or self.data.w_samp.sum() <= 0:
                raise ValueError("BNPR-PS needs sampling counts and a sampling window.")

    @property
    def axes(self) -> tuple[AxisName]:
        """Free search coordinates."""
        names = AXES_BNPR_PS if self.kind == ModelKind.BNPR_PS else AXES_BNPR
        natural = {"log_tau": "tau", "log_beta0": "beta0", "beta1": "beta1"}
        return tuple(name for name in names if natural[name] not in self.fixed)

    def hyperparams(self, theta: np.ndarray) -> Hyperparams:
        """Maps free search coordinates to hyperparameters, pinned values filled in."""
        values = dict(zip(self.axes, np.asarray(theta, dtype = float).reshape(-1)))
        tau = self.fixed.get("tau", math.exp(values.get("log_tau", 0.0)))
        if self.kind == ModelKind.BNPR:
            return Hyperparams(tau)
        beta0 = self.fixed.get("beta0", math.exp(values.get("log_beta0", 0.0)))
        beta1 = self.fixed.get("beta1", values.get("beta1", 0.0))
        return Hyperparams(tau, SamplingParams(beta0, beta1))

    def theta(self, hp: Hyperparams) -> np.ndarray:
        natural = {"log_tau": math.log(hp.tau)}
        if hp.samp is not None:
            natural.update(log_beta0 = math.log(hp.samp.beta0), beta1 = hp.samp.beta1)
        return np.array([natural[name] for name in self.axes])

    def initial_theta(self) -> np.ndarray:
        """Starting point of the search: tau = 1, homogeneous sampling rate, beta1 = 0."""
        start = {"log_tau": 0.0, "log_beta0": 0.0, "beta1": 0.0}
        if self.data is not None and self.data.w_samp.sum() > 0 and self.data.c.sum() > 0:
            start["log_beta0"] = math.log(self.data.c.sum() / self.data.w_samp.sum())
        return np.array([start[name] for name in self.axes])

    def initial_gamma(self) -> np.ndarray:
        """Constant start at the pooled one-cell mode log(sum E / max(1, sum d))."""
        if self.data is None or self.data.E.sum() <= 0:
            return np.zeros(self.grid.B)
        return np.full(self.grid.B, math.log(self.data.E.sum() / max(1.0, self.data.d.sum())))

    def loglik(self, gamma: np.ndarray, hp: Hyperparams) -> float:
        if self.replacement is not None:
            return self.replacement.loglik(gamma)
        traj = LogPopTrajectory(self.grid, gamma)
        value = coal_loglik(self.data, traj)
        if self.kind == ModelKind.BNPR_PS:
            value += samp_loglik(self.data, traj, hp.samp)
        return value

    def grad_hess(self, gamma: np.ndarray, hp: Hyperparams) -> tuple[np.ndarray, np.ndarray]:
        if self.replacement is not None:
            return self.replacement.grad_hess(gamma)
        traj = LogPopTrajectory(self.grid, gamma)
        grad, hess = coal_grad_hess(self.data, traj)
        if self.kind == ModelKind.BNPR_PS:
            samp_grad, samp_hess = samp_grad_hess(self.data, traj, hp.samp)
            grad, hess = grad + samp_grad, hess + samp_hess
        return grad, hess

@dataclass(frozen = True, eq = False)
class ThetaPoint:
    """
    One hyperparameter configuration of the integration grid and its Gaussian approximation.

    Args:
        hp (Hyperparams): Hyperparameters.
        theta (np.ndarray): Free search coordinates.
        log_marginal (float): Laplace-approximate log marginal of theta.
        log_weight (float): Normalized log integration weight.
        mode (np.ndarray): Conditional mode of gamma.
        cond_prec_diag (np.ndarray): Negated likelihood Hessian at the mode.
        marginal_sd (np.ndarray): Per-cell standard deviation of the Gaussian approximation.
    """
    hp: Hyperparams
    theta: np.ndarray
    log_marginal: float
    log_weight: float = 0.0
    mode: np.ndarray = None
    cond_prec_diag: np.ndarray = None
    marginal_sd: np.ndarray = None

    def to_dict(self) -> dict:
        return {**self.hp.to_dict(), "log_marginal": self.log_marginal, "log_weight": self.log_weight, "weight": math.exp(self.log_weight)}

def _objective(model: ModelSpec, gamma: np.ndarray, hp: Hyperparams) -> float:
    with np.errstate(over = "ignore"):
        return model.loglik(gamma, hp) - 0.5 * hp.tau * float(np.sum(np.diff(gamma) ** 2))

def _newton_system(model: ModelSpec, gamma: np.ndarray, hp: Hyperparams) -> tuple[np.ndarray, np.ndarray, TridiagCholesky]:
    """Gradient of the log posterior, negated likelihood Hessian and the factor of tau Q + D."""
    grad, hess = model.grad_hess(gamma, hp)
    grad = grad - rw1_precision_apply(hp.tau, gamma)
    q_diag, q_off = rw1_structure(model.grid.B)
    return grad, -hess, TridiagCholesky(hp.tau * q_diag - hess, hp.tau * q_off)

def find_mode(model: ModelSpec, hp: Hyperparams, gamma_init: np.ndarray = None, max_iter: int = MAX_NEWTON_ITER) -> tuple[np.ndarray, int]:
    """Finds the mode of log Pr(gamma | theta, data) by damped Newton-Raphson.

    Each step solves the tridiagonal system (tau Q + D) step = gradient through a banded
    Cholesky factor; a step that does not increase the objective is halved up to 30 times.

    Args:
        model (ModelSpec): The posterior.
        hp (Hyperparams): Hyperparameters.
        gamma_init (np.ndarray, optional): Starting point. Defaults to model.initial_gamma().
        max_iter (int, optional): Iteration limit. Defaults to 100.

    Raises:
        ConvergenceError: If the step does not drop below 1e-8 within max_iter iterations.
        DegenerateDataError: If the Newton system is singular (no information in the data).

    Returns:
        tuple[np.ndarray, int]: The mode and the number of Newton steps taken.
    """
    gamma = model.initial_gamma() if gamma_init is None else np.array(gamma_init, dtype = float)
    if gamma.shape != (model.grid.B,):
        raise ValueError(f"Initial gamma needs {model.grid.B} values, got shape {gamma.shape}.")
    value = _objective(model, gamma, hp)

    for iteration in range(max_iter + 1):
        grad, _, factor = _newton_system(model, gamma, hp)
        step = factor.solve(grad)
        if np.max(np.abs(step)) < NEWTON_TOL:
            grad_norm = float(np.max(np.abs(grad)))
            if grad_norm > EXIT_GRADIENT_TOL:
                logger.warning(f"Newton exit gradient norm {grad_norm:.3g} above {EXIT_GRADIENT_TOL}")
            logger.debug(f"Newton converged in {iteration} steps at tau = {hp.tau:.4g}")
            return gamma, iteration
        if iteration == max_iter:
            break

        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            candidate = gamma + scale * step
            candidate_value = _objective(model, candidate, hp)
            if np.isfinite(candidate_value) and candidate_value >= value - 1e-12 * (1.0 + abs(value)):
                break
            scale /= 2
        else:
            # no ascent left at float precision
            logger.debug(f"Newton step could not be damped into an ascent at iteration {iteration}")
            return gamma, iteration
        gamma, value = candidate, candidate_value

    grad_norm = float(np.max(np.abs(grad)))
    raise ConvergenceError(
        f"Newton-Raphson did not converge in {max_iter} iterations (gradient norm {grad_norm:.3g}).",
        error = {"iterations": max_iter, "gradient_norm": grad_norm},
    )

def laplace_point(model: ModelSpec, hp: Hyperparams, gamma_init: np.ndarray = None) -> ThetaPoint:
    """Gaussian approximation at the conditional mode plus the Laplace log marginal of theta."""
    mode, _ = find_mode(model, hp, gamma_init)
    _, prec_diag, factor = _newton_system(model, mode, hp)
    B = model.grid.B
    log_marginal = (
        model.loglik(mode, hp)
        + rw1_log_density(mode, hp.tau)
        + log_hyperprior_z(hp)
        + 0.5 * B * math.log(2 * math.pi)
        - 0.5 * factor.logdet()
    )
    return ThetaPoint(
        hp = hp,
        theta = model.theta(hp),
        log_marginal = float(log_marginal),
        mode = mode,
        cond_prec_diag = prec_diag,
        marginal_sd = np.sqrt(factor.diag_inverse()),
    )

def log_marginal_theta(model: ModelSpec, hp: Hyperparams, gamma_init: np.ndarray = None) -> float:
    """Laplace approximation of log Pr(theta | data) up to a theta-free constant.

    The value is a density over the search coordinates (log tau, log beta0, beta1): the
    hyperprior carries the log-scale Jacobian.
    """
    return laplace_point(model, hp, gamma_init).log_marginal

def _hessian(fun, x: np.ndarray, step: float = HESSIAN_STEP) -> np.ndarray:
    """Central finite-difference Hessian."""
    size = len(x)
    hessian = np.zeros((size, size))
    f0 = fun(x)
    unit = np.eye(size) * step
    for i in range(size):
        hessian[i, i] = (fun(x + unit[i]) - 2 * f0 + fun(x - unit[i])) / step ** 2
        for j in range(i):
            value = (fun(x + unit[i] + unit[j]) - fun(x + unit[i] - unit[j]) - fun(x - unit[i] + unit[j]) + fun(x - unit[i] - unit[j])) / (4 * step ** 2)
            hessian[i, j] = hessian[j, i] = value
    return hessian

def grid_scaling(log_density, optimum: np.ndarray) -> np.ndarray:
    """Maps standardized coordinates z to theta offsets, so that -log_density(optimum + S z) ~ |z|^2 / 2.

    A first pass takes V Lambda^(-1/2) from the eigendecomposition of the curvature at the
    optimum (step 0.05 in theta). The curvature is then measured again in those coordinates
    at the width of a grid step, and its Cholesky factor L refines the map to S0 L^(-T).
    """
    size = len(optimum)

    def negative(theta: np.ndarray) -> float:
        return -log_density(theta)

    hessian = _hessian(negative, optimum)
    if not np.all(np.isfinite(hessian)):
        logger.warning("Hyperparameter Hessian is not finite, using unit scaling")
        return np.eye(size)
    eigenvalues, eigenvectors = np.linalg.eigh(hessian)
    if np.any(eigenvalues <= 0):
        logger.warning("Hyperparameter Hessian is not positive definite, using unit scaling")
        return np.eye(size)
    first = eigenvectors / np.sqrt(eigenvalues)

    standardized = _hessian(lambda z: negative(optimum + first @ z), np.zeros(size), step = STANDARDIZED_HESSIAN_STEP)
    if not np.all(np.isfinite(standardized)):
        return first
    try:
        lower = cholesky(standardized, lower = True)
    except LinAlgError:
        logger.debug("Standardized Hessian is not positive definite, keeping the first pass scaling")
        return first
    return first @ solve_triangular(lower, np.eye(size), lower = True, trans = "T")

def maximize_log_density(log_density, start: np.ndarray, scaling: np.ndarray = None) -> tuple[np.ndarray, float, int]:
    """Maximizes a log density by Nelder-Mead over theta = start + scaling z, from a unit simplex in z.

    Raises:
        ConvergenceError: If the optimizer needs more than 500 evaluations or ends on a non-finite value.

    Returns:
        tuple[np.ndarray, float, int]: The maximizer, the log density there and the number of evaluations.
    """
    start = np.asarray(start, dtype = float)
    scaling = np.eye(len(start)) if scaling is None else scaling

    def negative(z: np.ndarray) -> float:
        value = log_density(start + scaling @ z)
        return -value if np.isfinite(value) else np.inf

    origin = np.zeros(len(start))
    result = minimize(
        negative, origin, method = "Nelder-Mead",
        options = {"xatol": OPTIMIZER_XTOL, "fatol": 1e-8, "maxfev": OPTIMIZER_MAX_EVAL, "initial_simplex": np.vstack([origin, np.eye(len(start))])},
    )
    if not result.success or not np.isfinite(result.fun):
        raise ConvergenceError(f"Hyperparameter search did not converge: {result.message}", error = {"evaluations": int(result.nfev)})
    return start + scaling @ result.x, float(-result.fun), int(result.nfev)

def standardized_grid(log_density, optimum: np.ndarray, scaling: np.ndarray = None) -> tuple[np.ndarray, np.ndarray]:
    """Builds the integration grid around the optimum: step 0.75 in standardized coordinates, 3 steps each way per axis.

    Points whose log density is not finite or lies more than 10 below the best are dropped.

    Returns:
        tuple[np.ndarray, np.ndarray]: Retained thetas (one per row) and their normalized log weights.
    """
    optimum = np.asarray(optimum, dtype = float)
    scaling = grid_scaling(log_density, optimum) if scaling is None else scaling
    offsets = GRID_STEP * np.arange(-GRID_HALF_WIDTH, GRID_HALF_WIDTH + 1)

    thetas, values = [], []
    for z in itertools.product(offsets, repeat = len(optimum)):
        theta = optimum + scaling @ np.array(z)
        value = log_density(theta)
        if np.isfinite(value):
            thetas.append(theta)
            values.append(value)
    if not values:
        raise ConvergenceError("No hyperparameter grid point could be evaluated.", error = {"optimum": optimum.tolist()})

    values = np.array(values)
    keep = values >= values.max() - PRUNE_DELTA
    thetas, values = np.array(thetas)[keep], values[keep]
    logger.debug(f"Retained {len(values)} of {len(offsets) ** len(optimum)} hyperparameter grid points")
    return thetas, values - logsumexp(values)

def explore_hyperparams(model: ModelSpec) -> list[ThetaPoint]:
    """Locates the mode of the hyperparameter marginal and builds the weighted integration grid.

    Nelder-Mead maximizes the Laplace log marginal over the free coordinates, then polishes the
    optimum again in the standardized coordinates of its curvature. The grid is regular in those
    coordinates (step 0.75, 3 steps each way per axis); points more than 10 log units below the
    best are pruned and the rest weighted by their normalized marginal.

    Raises:
        ConvergenceError: If the optimizer needs more than 500 evaluations.

    Returns:
        list[ThetaPoint]: Retained points with normalized log weights.
    """
    axes = model.axes
    if not axes:
        point = laplace_point(model, model.hyperparams(np.array([])))
        return [replace(point, log_weight = 0.0)]

    warm = {"gamma": model.initial_gamma()}
    tau_axis = axes.index("log_tau") if "log_tau" in axes else None
    cache: dict[bytes, ThetaPoint|None] = {}

    def point_at(theta: np.ndarray) -> ThetaPoint|None:
        theta = np.asarray(theta, dtype = float)
        key = theta.tobytes()
        if key in cache:
            return cache[key]
        point = None
        if tau_axis is None or LOG_TAU_BOUNDS[0] <= theta[tau_axis] <= LOG_TAU_BOUNDS[1]:
            try:
                point = laplace_point(model, model.hyperparams(theta), warm["gamma"])
            except (ConvergenceError, DegenerateDataError, ValueError, OverflowError) as e:
                logger.debug(f"Skipping theta = {theta}: {e}")
        if point is not None and np.isfinite(point.log_marginal):
            warm["gamma"] = point.mode
        cache[key] = point
        return point

    def log_density(theta: np.ndarray) -> float:
        point = point_at(theta)
        return -np.inf if point is None else point.log_marginal

    optimum, value, evaluations = maximize_log_density(log_density, model.initial_theta())
    scaling = grid_scaling(log_density, optimum)
    try:
        polished, polished_value, extra = maximize_log_density(log_density, optimum, scaling)
        evaluations += extra
        if polished_value > value:
            optimum, value = polished, polished_value
            scaling = grid_scaling(log_density, optimum)
    except ConvergenceError as e:
        logger.warning(f"Keeping the unpolished hyperparameter optimum: {e}")
    logger.info(f"Hyperparameter optimum {dict(zip(axes, np.round(optimum, 4)))} after {evaluations} evaluations")

    thetas, log_weights = standardized_grid(log_density, optimum, scaling)
    points = [replace(point_at(theta), log_weight = float(log_weight)) for theta, log_weight in zip(thetas, log_weights)]
    logger.info(f"Retained {len(points)} of {(2 * GRID_HALF_WIDTH + 1) ** len(axes)} hyperparameter grid points")
    return points

def mixture_quantiles(weights: np.ndarray, means: np.ndarray, sds: np.ndarray, q: float) -> np.ndarray:
    """Per-column quantile of Gaussian mixtures by bisection on the mixture CDF.

    Args:
        weights (np.ndarray): K mixture weights summing to 1.
        means (np.ndarray): K x B component means.
        sds (np.ndarray): K x B component standard deviations.
        q (float): Probability level.

    Returns:
        np.ndarray: B quantiles.
    """
    weights = np.asarray(weights, dtype = float)[:, None]
    lo = np.min(means - 12 * sds, axis = 0)
    hi = np.max(means + 12 * sds, axis = 0)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        below = np.sum(weights * norm.cdf((mid - means) / sds), axis = 0) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.max(hi - lo) < BISECTION_TOL:
            break
    return 0.5 * (lo + hi)

def mixture_cdf(weights: np.ndarray, means: np.ndarray, sds: np.ndarray, x: np.ndarray) -> np.ndarray:
    weights = np.asarray(weights, dtype = float)[:, None]
    return np.sum(weights * norm.cdf((x - means) / sds), axis = 0)

def weighted_quantile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Quantile of a weighted point set, interpolating the midpoint cumulative weights."""
    values = np.asarray(values, dtype = float)
    weights = np.asarray(weights, dtype = float)
    order = np.argsort(values)
    values, weights = values[order], weights[order] / weights.sum()
    cumulative = np.cumsum(weights) - 0.5 * weights
    return float(np.interp(q, cumulative, values))

def summarize_points(values: np.ndarray, weights: np.ndarray) -> tuple[float, float, float]:
    """(median, 2.5% quantile, 97.5% quantile) of a weighted point set."""
    lower, median, upper = (weighted_quantile(values, weights, q) for q in QUANTILES)
    return median, lower, upper

@dataclass(eq = False)
class PosteriorSummary:
    """
    Posterior medians and 95% credible intervals of the effective population size per cell,
    plus hyperparameter summaries.

    Args:
        grid (Grid): The grid.
        ne_median (np.ndarray): Per-cell posterior median of N.
        ne_q025 (np.ndarray): Per-cell 2.5% quantile.
        ne_q975 (np.ndarray): Per-cell 97.5% quantile.
        theta_points (list[ThetaPoint]): The weighted hyperparameter grid.
        tau_summary (tuple[float, float, float]): (median, lower, upper) of tau.
        beta1_ci (tuple[float, float], optional): 95% interval of beta1 (BNPR-PS only).
        beta1_median (float, optional): Posterior median of beta1 (BNPR-PS only).
        log_beta0_summary (tuple[float, float, float], optional): (median, lower, upper) of log beta0.
        kind (str): The model that produced it.
    """
    grid: Grid
    ne_median: np.ndarray
    ne_q025: np.ndarray
    ne_q975: np.ndarray
    theta_points: list = field(default_factory = list)
    tau_summary: tuple = None
    beta1_ci: tuple = None
    beta1_median: float = None
    log_beta0_summary: tuple = None
    kind: str = None

    def ne_at(self, t: TimeType|np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(median, q025, q975) at time(s) t by cell lookup."""
        cells = self.grid.cell(t)
        return self.ne_median[cells], self.ne_q025[cells], self.ne_q975[cells]

    def compact(self) -> "PosteriorSummary":
        """A copy without the per-point latent arrays."""
        points = [replace(point, mode = None, cond_prec_diag = None, marginal_sd = None) for point in self.theta_points]
        return replace(self, theta_points = points)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "time": self.grid.midpoints,
            "median": self.ne_median,
            "q025": self.ne_q025,
            "q975": self.ne_q975,
        })

    @classmethod
    def from_frame(cls, df: pd.DataFrame, kind: str = None) -> "PosteriorSummary":
        """Rebuilds the trajectory part of a summary from its CSV frame."""
        df = df.sort_values("time")
        times = df["time"].to_numpy(dtype = float)
        if len(times) < 2:
            raise ValueError("A trajectory frame needs at least 2 rows.")
        w = times[1] - times[0]
        grid = build_grid(max(0.0, times[0] - w / 2), times[-1] + w / 2, len(times))
        return cls(grid, df["median"].to_numpy(dtype = float), df["q025"].to_numpy(dtype = float), df["q975"].to_numpy(dtype = float), kind = kind)

    def hyperparameter_dict(self) -> dict:
        values = {"kind": self.kind}
        if self.tau_summary is not None:
            values["tau"] = dict(zip(("median", "lower", "upper"), self.tau_summary))
        if self.beta1_ci is not None:
            values["beta1"] = {"median": self.beta1_median, "lower": self.beta1_ci[0], "upper": self.beta1_ci[1]}
        if self.log_beta0_summary is not None:
            values["log_beta0"] = dict(zip(("median", "lower", "upper"), self.log_beta0_summary))
        return values

    def to_dict(self) -> dict:
        return {
            **self.hyperparameter_dict(),
            "grid": {"t_min": self.grid.t_min, "t_max": self.grid.t_max, "B": self.grid.B},
            "theta_grid": [point.to_dict() for point in self.theta_points],
        }

def marginal_summaries(model: ModelSpec, thetas: list[ThetaPoint]) -> PosteriorSummary:
    """Mixes the per-theta Gaussian marginals into posterior medians and 95% intervals.

    Raises:
        ValueError: If no theta point is given.
    """
    if not thetas:
        raise ValueError("Cannot summarize an empty set of hyperparameter points.")
    weights = np.exp([point.log_weight for point in thetas])
    weights = weights / weights.sum()
    means = np.vstack([point.mode for point in thetas])
    sds = np.vstack([point.marginal_sd for point in thetas])

    lower, median, upper = (mixture_quantiles(weights, means, sds, q) for q in QUANTILES)
    # quantiles are monotone in q; enforce it against bisection round-off
    median = np.clip(median, lower, upper)

    taus = [point.hp.tau for point in thetas]
    summary = PosteriorSummary(
        grid = model.grid,
        ne_median = np.exp(median),
        ne_q025 = np.exp(lower),
        ne_q975 = np.exp(upper),
        theta_points = list(thetas),
        tau_summary = summarize_points(taus, weights),
        kind = model.kind.value,
    )
    if model.kind == ModelKind.BNPR_PS:
        beta1_median, beta1_lower, beta1_upper = summarize_points([point.hp.samp.beta1 for point in thetas], weights)
        summary.beta1_median = beta1_median
        summary.beta1_ci = (beta1_lower, beta1_upper)
        summary.log_beta0_summary = summarize_points([math.log(point.hp.samp.beta0) for point in thetas], weights)
    return summary

def reconstruct(
    gen: Genealogy,
    kind: ModelKind|str = ModelKind.BNPR,
    grid_size: int = 100,
    grid: Grid = None,
    fixed: dict = None,
) -> PosteriorSummary:
    """Reconstructs the effective population size trajectory of a genealogy.

    Args:
        gen (Genealogy): The genealogy.
        kind (ModelKind | str, optional): "bnpr" or "bnpr-ps". Defaults to "bnpr".
        grid_size (int, optional): Number of cells of the default grid. Defaults to 100.
        grid (Grid, optional): Overrides the default grid over [0, max(root, s0)].
        fixed (dict, optional): Pinned hyperparameters. Defaults to None.

    Returns:
        PosteriorSummary: The posterior summary.
    """
    grid = gen.default_grid(grid_size) if grid is None else grid
    data = decompose_intervals(gen, grid)
    model = ModelSpec(ModelKind(kind), data, grid, fixed = dict(fixed or {}))
    thetas = explore_hyperparams(model)
    summary = marginal_summaries(model, thetas)
    logger.info(f"Reconstructed {model.kind.value} trajectory on {grid.B} cells from {gen.n} tips")
    return summary
