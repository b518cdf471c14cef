import math

import numpy as np

from dataclasses import dataclass
from scipy.special import gammaln

from phylodyn_ps.samp_lik import SamplingParams

# Define constants
TAU_SHAPE: float = 0.01
TAU_RATE: float = 0.01
BETA_VARIANCE: float = 1000.0

@dataclass(frozen = True)
class Hyperparams:
    """
    Hyperparameters of both models.

    Args:
        tau (float): Precision of the first-order random walk.
        samp (SamplingParams, optional): Sampling intensity parameters; None for the conditional model.
    """
    tau: float
    samp: SamplingParams = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.tau) or self.tau <= 0:
            raise ValueError(f"tau must be positive and finite, got {self.tau}.")

    def to_dict(self) -> dict:
        values = {"tau": self.tau}
        if self.samp is not None:
            values.update(beta0 = self.samp.beta0, beta1 = self.samp.beta1)
        return values

def rw1_quadform(gamma: np.ndarray) -> float:
    """Returns the sum of squared first differences of gamma."""
    gamma = np.asarray(gamma, dtype = float)
    if gamma.ndim != 1 or len(gamma) < 2:
        raise ValueError(f"The random walk needs at least 2 cells, got {gamma.shape}.")
    return float(np.sum(np.diff(gamma) ** 2))

def rw1_precision_apply(tau: float, v: np.ndarray, B: int = None) -> np.ndarray:
    """Returns tau * Q v for the random walk structure matrix Q (stencil [-1, 2, -1], boundary rows [1, -1]).

    Raises:
        ValueError: If tau is not positive or v does not have B entries.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}.")
    v = np.asarray(v, dtype = float)
    if B is not None and v.shape != (B,):
        raise ValueError(f"Vector length {v.shape} does not match B = {B}.")
    if v.ndim != 1 or len(v) < 2:
        raise ValueError(f"The random walk needs at least 2 cells, got {v.shape}.")
    diffs = np.diff(v)
    out = np.zeros_like(v)
    out[:-1] -= diffs
    out[1:] += diffs
    return tau * out

def rw1_structure(B: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the random walk structure matrix Q."""
    diag = np.full(B, 2.0)
    diag[0] = diag[-1] = 1.0
    return diag, -np.ones(B - 1)

def rw1_log_density(gamma: np.ndarray, tau: float) -> float:
    """Log prior of gamma up to a tau-free constant: ((B - 1)/2) log tau - (tau/2) quadform."""
    gamma = np.asarray(gamma, dtype = float)
    return 0.5 * (len(gamma) - 1) * math.log(tau) - 0.5 * tau * rw1_quadform(gamma)

def gamma_log_density(x: float, shape: float = TAU_SHAPE, rate: float = TAU_RATE) -> float:
    return shape * math.log(rate) - float(gammaln(shape)) + (shape - 1) * math.log(x) - rate * x

def normal_log_density(x: float, variance: float = BETA_VARIANCE) -> float:
    return -0.5 * math.log(2 * math.pi * variance) - 0.5 * x * x / variance

def log_hyperprior(hp: Hyperparams) -> float:
    """Gamma(0.01, 0.01) log density at tau plus, when present, Normal(0, 1000) log densities at beta0 and beta1."""
    if hp.tau <= 0:
        raise ValueError(f"tau must be positive, got {hp.tau}.")
    value = gamma_log_density(hp.tau)
    if hp.samp is not None:
        value += normal_log_density(hp.samp.beta0) + normal_log_density(hp.samp.beta1)
    return value

def log_hyperprior_z(hp: Hyperparams) -> float:
    """Hyperprior density of the search coordinates (log tau, log beta0, beta1), Jacobian included."""
    value = log_hyperprior(hp) + math.log(hp.tau)
    if hp.samp is not None:
        value += math.log(hp.samp.beta0)
    return value
