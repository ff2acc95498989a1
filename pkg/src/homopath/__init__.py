"""Residual-certified path following for nonlinear maps F: R^n -> R^m.

Three flows share a common certification story around a pluggable
approximate inverse M(x) of the Jacobian and its contraction factor
kappa = sup ||F'(x) M(x) + Id|| over a trust ball:

  * followers integrate x' = M(x) F(x0) and certify the residual
    schedule ||F(x(t)) - (1 - t) F(x0)|| <= kappa * t * ||F(x0)||;
  * a constructive builder produces piecewise-linear paths on dyadic
    partitions whose every step carries a re-checkable certificate;
  * restarts compound the unit-time bound into kappa^i contraction,
    and the inverse solver reads it as ||psi(u) - g|| <= kappa ||g||.
"""

from .builder import (
    AcceptRecord,
    PartitionPath,
    PathReport,
    build_path,
    refine,
    verify_path,
)
from .calculus import (
    DerivativeReport,
    check_derivative,
    directional_derivative_fd,
    jacobian,
    jacobian_fd,
)
from .driver import (
    STOP_DIVERGENCE,
    STOP_FOLLOWER_FAILURE,
    STOP_MAX_ITERATIONS,
    STOP_TOLERANCE,
    InverseSolution,
    RestartSequence,
    iterate_restarts,
    solve_inverse,
)
from .errors import (
    BallExitError,
    CertificationError,
    DimensionMismatchError,
    EvaluationError,
    HomopathError,
    MaxStepsExceededError,
    SingularJacobianError,
    StepAcceptanceError,
    StepUnderflowError,
)
from .flow import (
    FLOW_CONTINUOUS_NEWTON,
    FLOW_DAVIDENKO,
    FLOW_GENERALIZED,
    IntegratorConfig,
    IntegratorStats,
    PathTrace,
    TracePoint,
    bridge_check,
    follow_continuous_newton,
    follow_davidenko,
    follow_generalized,
    reparametrize_time,
    write_trace_csv,
)
from .model import (
    HomotopyDefect,
    InverseProblem,
    Problem,
    corpus,
    get_inverse_problem,
    get_problem,
    homotopy_defect,
    make_inverse_problem,
    problem_names,
    psi_names,
)
from .operators import (
    InverseOperator,
    custom,
    damped,
    diagonal,
    exact_newton,
    frozen_jacobian,
    parse_operator_spec,
)
from .spectral import (
    CLOSED_FORM,
    SAMPLED_BALL,
    KappaEstimate,
    ResidualOperator,
    check_against_closed_form,
    estimate_kappa,
    operator_norm,
    residual_operator,
)

__version__ = "1.0.0"

__all__ = [
    "CLOSED_FORM",
    "FLOW_CONTINUOUS_NEWTON",
    "FLOW_DAVIDENKO",
    "FLOW_GENERALIZED",
    "SAMPLED_BALL",
    "STOP_DIVERGENCE",
    "STOP_FOLLOWER_FAILURE",
    "STOP_MAX_ITERATIONS",
    "STOP_TOLERANCE",
    "AcceptRecord",
    "BallExitError",
    "CertificationError",
    "DerivativeReport",
    "DimensionMismatchError",
    "EvaluationError",
    "HomopathError",
    "HomotopyDefect",
    "IntegratorConfig",
    "IntegratorStats",
    "InverseOperator",
    "InverseProblem",
    "InverseSolution",
    "KappaEstimate",
    "MaxStepsExceededError",
    "PartitionPath",
    "PathReport",
    "PathTrace",
    "Problem",
    "ResidualOperator",
    "RestartSequence",
    "SingularJacobianError",
    "StepAcceptanceError",
    "StepUnderflowError",
    "TracePoint",
    "bridge_check",
    "build_path",
    "check_against_closed_form",
    "check_derivative",
    "corpus",
    "custom",
    "damped",
    "diagonal",
    "directional_derivative_fd",
    "estimate_kappa",
    "exact_newton",
    "follow_continuous_newton",
    "follow_davidenko",
    "follow_generalized",
    "frozen_jacobian",
    "get_inverse_problem",
    "get_problem",
    "homotopy_defect",
    "iterate_restarts",
    "jacobian",
    "jacobian_fd",
    "make_inverse_problem",
    "operator_norm",
    "parse_operator_spec",
    "problem_names",
    "psi_names",
    "refine",
    "reparametrize_time",
    "residual_operator",
    "solve_inverse",
    "verify_path",
    "write_trace_csv",
]
