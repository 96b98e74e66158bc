"""Overtesting discretizations for well-posed linear recovery problems.

Trial spaces are tested by many more data functionals than they have
dimensions, chosen greedily until the restricted data norm controls the
full one up to a fixed factor.  Solving the resulting overdetermined system
in the discrete sup norm then inherits the approximation rate of the trial
space.
"""

from .discretization import (GreedyBudgetExhausted, Restriction, StabilityEstimate, assemble,
                             estimate_stability, greedy_stabilize, verify_mrd)
from .domains import Disk, Interval, Rectangle, make_domain
from .functionals import (BoundaryFluxAverage, DataMap, DiffOpEval, LocalWeakAverage, PointEval,
                          WeakGradientPair, WeakL2Pair, apply_all, data_seminorm)
from .kernels import RadialKernel, SmoothnessError, make_kernel
from .problems import NoiseModel, ProblemSpec, make_problem, perturb_data, trial_space_data_error, wp_error
from .solvers import solve, solve_chebyshev, solve_least_squares, symmetric_collocation
from .study import StudyResult, rate_estimate
from .trialspaces import KernelSpace, PolynomialSpace, RepresenterSpace, fill_distance, rebase

__version__ = "0.1.0"
