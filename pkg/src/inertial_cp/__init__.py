"""Plain and inertial Chambolle-Pock solvers, their linearized ADMM
equivalents, and a total-variation imaging benchmark."""
from ._kernels import get_backend, set_backend
from .diagnostics import (EquivalenceReport, RateCertificate, certificate_constant,
                          check_rate_certificate, check_residual_rate, compare_runs,
                          fejer_distances, snr, tv_value)
from .experiments import (ExperimentConfig, Phantom, assemble_problem, emit_plot_data,
                          generate_phantom, load_raw_image, run_experiment, save_raw_image)
from .linops import (DenseMap, FiniteDifferenceMap, IdentityMap, LinearMap,
                     PartialWalshHadamardMap, estimate_spectral_bound, fwht)
from .proxops import (AffineProjection, Conjugate, DiagonalQuadratic, GroupNorm,
                      ProxFunction, Zero, ZeroIndicator, group_soft_threshold)
from .solvers import (ConfigError, GMetric, NonFiniteIterateError, SaddleProblem,
                      SolverConfig, Variant, reference_solution, solve, trajectory)

__version__ = "0.1.0"
