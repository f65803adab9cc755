"""Exact policy gradient under the Hadamard parameterization for tabular MDPs."""
from .analysis import AuditReport, TheoremConstants, audit, compute_constants, estimate_lambda
from .baselines import (MabInstance, SoftmaxParams, mab_hadamard_step, softmax_npg_step,
                        softmax_pg_step)
from .hadamard import (FreeParams, RunTrace, SphereParams, StepConfig, hadamard_step,
                       normalized_step, policy_delta, riemannian_gradient, run)
from .mdp import (OptimalBundle, TabularMdp, ValueBundle, b_gap, load_mdp, performance_difference,
                  policy_evaluation, solve_optimal, validate_mdp, value_error_bound)

__version__ = "0.1.0"
