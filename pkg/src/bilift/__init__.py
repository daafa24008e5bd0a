"""Exact bilinearization of control-affine systems by Lie-derivative closure.

The pipeline: parse a system into exact symbolic form, close a seed space
of functions under Lie derivation along the drift and control fields,
extract the lifted bilinear matrices when the chain stabilizes, then
simulate, sample reachable sets, stabilize, and steer on the lifted form.
"""

from .closure import (
    AUGMENT,
    OFFSET,
    ClosureConfig,
    ClosureOutcome,
    ClosureStatus,
    closure_run,
    closure_step,
    lie_derivation_space,
)
from .control import (
    ClosedLoopResult,
    QuadraticCost,
    StabilizerConfig,
    SteerOptions,
    SteeringProblem,
    SteeringResult,
    closed_loop_simulate,
    costate_control,
    default_stabilizer,
    fbsm_solve,
    gain_bound,
    solve_lyapunov,
    stabilizing_control,
    steer_objective,
    steer_optimize,
)
from .errors import BiliftError
from .expr import (
    AffineForm,
    Atom,
    CanonicalExpr,
    VectorField,
    add,
    evaluate,
    lie_derivative,
    mul,
    partial,
    scale,
)
from .parser import parse_expr
from .reach import (
    AdjointSpan,
    ReachSampleSet,
    adjoint_chain,
    commutation_check,
    dim_equivalence,
    flow_adjoint_span,
    lie_rank_bilinear,
    lie_rank_nonlinear,
    reach_sample,
    vf_bracket,
)
from .realization import (
    BilinearRealization,
    EmbeddingReport,
    EmbeddingVerdict,
    extract_realization,
    lift,
    project,
    pushforward_residual,
    verify_embedding,
)
from .simulate import (
    ControlSchedule,
    Trajectory,
    consistency_error,
    expm,
    segment_flow,
    simulate_nonlinear_rk4,
    simulate_piecewise,
)
from .spaces import FunctionSpace, space_contains, space_reduce, space_sum
from .systems import NonlinearSystem

__version__ = "0.1.0"
