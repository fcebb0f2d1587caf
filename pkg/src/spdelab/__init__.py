"""spdelab: numerical laboratory for controlled convection-diffusion SPDEs.

Core layers: coefficient fields (`coeffs`), weighted grids and operator
assembly (`grids`, `operators`), transition kernels (`kernels`), the
forward pathwise solver (`forward`), the linear backward equation
(`bspde`), the two-player game (`game`), cross-checking oracles
(`verify`), and the scenario-driven command line (`scenario`, `cli`).
"""

from .coeffs import (CoefficientField, EllipticityBounds, InterfaceCoefficients,
                     ValidationReport, interface_coefficients, validate_hypothesis)
from .grids import Field, WeightedGrid, inner_product, weighted_norm
from .operators import (DiscreteOperator, adjoint_residual, assemble_adjoint,
                        assemble_operator, coercivity_check, default_coercivity_params)
from .kernels import (GaussianKernelParams, TwoPhaseKernel, apply_kernel,
                      aronson_bound_check, build_two_phase_kernel, gaussian_density)
from .forward import (ForwardProblem, ForwardSolution, PathEnsemble,
                      mild_residual, picard_iterate, simulate_forward)
from .bspde import (BackwardSolution, LinearBspdeProblem, feynman_kac_mc,
                    q_consistency, solve_backward_fd, solve_closed_form,
                    transmission_residual)
from .game import (AdjointPair, ControlTrajectory, Equilibrium, GameSpec,
                   cost, gaussian_convolution_control, hamiltonian,
                   kernel_route_controls, nash_deviation_test, optimal_control,
                   solve_adjoint, solve_equilibrium, stationarity_residual)

__version__ = "0.1.0"
