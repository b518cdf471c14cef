"""Discretized coalescent log-likelihood in the log population sizes.

The gamma-free combinatorial constants (products of A(A-1)/2 at each coalescent event) are
dropped, so absolute values differ from the full serial-coalescent density by a constant.
"""
import numpy as np

from phylodyn_ps.genealogy import IntervalData
from phylodyn_ps.grid_traj import LogPopTrajectory, check_same_grid

def _check(data: IntervalData, traj: LogPopTrajectory) -> np.ndarray:
    check_same_grid(data.grid, traj.grid)
    gamma = traj.gamma
    if not np.all(np.isfinite(gamma)):
        raise ValueError("Trajectory values must be finite.")
    return gamma

def coal_loglik(data: IntervalData, traj: LogPopTrajectory) -> float:
    """Returns sum_j [ -d_j * gamma_j - E_j * exp(-gamma_j) ]."""
    gamma = _check(data, traj)
    return float(-np.dot(data.d, gamma) - np.dot(data.E, np.exp(-gamma)))

def coal_grad_hess(data: IntervalData, traj: LogPopTrajectory) -> tuple[np.ndarray, np.ndarray]:
    """Returns the gradient and the (exactly diagonal) Hessian of coal_loglik in gamma."""
    gamma = _check(data, traj)
    pressure = data.E * np.exp(-gamma)
    return pressure - data.d, -pressure
