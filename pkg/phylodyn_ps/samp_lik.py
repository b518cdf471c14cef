"""Inhomogeneous Poisson sampling-time log-likelihood with intensity beta0 * N(t)^beta1.

Samples are bucketed on the grid cells; the event-time base measure constant is dropped.
"""
import math

import numpy as np

from dataclasses import dataclass

from phylodyn_ps.genealogy import IntervalData
from phylodyn_ps.grid_traj import LogPopTrajectory, check_same_grid

@dataclass(frozen = True)
class SamplingParams:
    """
    Parameters of the sampling intensity lambda(t) = beta0 * N(t)^beta1.

    Args:
        beta0 (float): Baseline intensity, events per time unit.
        beta1 (float): Power on the effective population size.
    """
    beta0: float
    beta1: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.beta0) and math.isfinite(self.beta1)):
            raise ValueError(f"Sampling parameters must be finite, got {self}.")
        if self.beta0 <= 0:
            raise ValueError(f"beta0 must be positive, got {self.beta0}.")

def samp_loglik(data: IntervalData, traj: LogPopTrajectory, par: SamplingParams) -> float:
    """Returns n log beta0 + beta1 sum_j c_j gamma_j - beta0 sum_j w_samp_j exp(beta1 gamma_j)."""
    check_same_grid(data.grid, traj.grid)
    gamma = traj.gamma
    n = data.c.sum()
    return float(
        n * math.log(par.beta0)
        + par.beta1 * np.dot(data.c, gamma)
        - par.beta0 * np.dot(data.w_samp, np.exp(par.beta1 * gamma))
    )

def samp_grad_hess(data: IntervalData, traj: LogPopTrajectory, par: SamplingParams) -> tuple[np.ndarray, np.ndarray]:
    """Returns the gradient and the diagonal Hessian of samp_loglik in gamma."""
    check_same_grid(data.grid, traj.grid)
    intensity = par.beta0 * data.w_samp * np.exp(par.beta1 * traj.gamma)
    return par.beta1 * data.c - par.beta1 * intensity, -par.beta1 ** 2 * intensity
