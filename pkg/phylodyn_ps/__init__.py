__version__ = "0.1.0"

from phylodyn_ps.exceptions import PhylodynError, NewickParseError, GenealogyError, GridMismatchError
from phylodyn_ps.exceptions import ConvergenceError, DegenerateDataError, SimulationError

from phylodyn_ps.grid_traj import Grid, LogPopTrajectory, build_grid, integrate_exp, check_same_grid

from phylodyn_ps.newick import Node, Tree, parse_newick, serialize_newick, read_newick
from phylodyn_ps.genealogy import Genealogy, IntervalData, extract_events, decompose_intervals
from phylodyn_ps.genealogy import read_sidecar, write_sidecar, DEFAULT_TOL

from phylodyn_ps.coal_lik import coal_loglik, coal_grad_hess
from phylodyn_ps.samp_lik import SamplingParams, samp_loglik, samp_grad_hess
from phylodyn_ps.prior import Hyperparams, rw1_quadform, rw1_precision_apply, log_hyperprior

from phylodyn_ps.inference import ModelKind, ModelSpec, ThetaPoint, PosteriorSummary, GaussianLikelihood
from phylodyn_ps.inference import find_mode, log_marginal_theta, explore_hyperparams, marginal_summaries, reconstruct

from phylodyn_ps.simulator import IntensityFn, IntensityKind, SampleSchedule
from phylodyn_ps.simulator import seasonal_ne, sample_times, simulate_coalescent, negative_control_intensity

from phylodyn_ps.metrics import StudyResult, interval_stats, pointwise_stats, emrw, pointwise_emrw, seasonal_overlay
