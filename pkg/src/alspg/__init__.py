"""Projection-based constrained optimization for robot planning and control.

The package is layered: analytic set projections (`alspg.sets`) feed a
spectral projected-gradient inner solver (`alspg.spg`), which drives an
augmented-Lagrangian outer loop (`alspg.al`); trajectory
problems are posed in control space through adjoint recursions
(`alspg.shooting`); `alspg.models` holds the dynamics/kinematics used by the
bundled benchmarks; `alspg.ilqr` is the baseline. `alspg.bench` runs
reproducible experiments and `alspg.service` exposes everything over HTTP
plus a WebSocket playground.
"""

__version__ = "0.1.0"

from .al import (
    AlspgOptions,
    ConstraintBlock,
    DenseMap,
    FunctionMap,
    NlpProblem,
    al_gradient,
    al_value,
    alspg_solve,
    equality_block,
    reduce_inequalities,
)
from .ilqr import IlqrOptions, ilqr_solve
from .models import (
    ChanceConstraintMap,
    DoubleIntegrator2D,
    KinematicChainModel,
    PlanarArm,
    PusherSlider,
    TaskSpaceGoalCost,
    closed_loop_ik_step,
    constrained_ik,
    robust_ik,
)
from .report import Counters, SolveReport, Termination
from .sets import (
    Bounds,
    HyperplaneSlab,
    Point,
    PolytopeIn,
    PolytopeOut,
    ProjectionSet,
    QuadricAnnulus,
    RectangleIn,
    RectangleOut,
    SecondOrderCone,
    Stacked,
    Transformed,
    rotated_rectangle_set,
)
from .shooting import (
    DynamicsModel,
    GoalCost,
    LinearizedDynamics,
    OutputConstraint,
    ShootingProblem,
    Trajectory,
    build_oc_problem,
    jac_transpose_vec,
    mpc_loop,
    rollout,
)
from .spg import SpgOptions, spg_minimize

__all__ = [
    "AlspgOptions",
    "Bounds",
    "ChanceConstraintMap",
    "ConstraintBlock",
    "Counters",
    "DenseMap",
    "DynamicsModel",
    "DoubleIntegrator2D",
    "FunctionMap",
    "GoalCost",
    "HyperplaneSlab",
    "IlqrOptions",
    "KinematicChainModel",
    "LinearizedDynamics",
    "NlpProblem",
    "OutputConstraint",
    "PlanarArm",
    "Point",
    "PolytopeIn",
    "PolytopeOut",
    "ProjectionSet",
    "PusherSlider",
    "QuadricAnnulus",
    "RectangleIn",
    "RectangleOut",
    "SecondOrderCone",
    "ShootingProblem",
    "SolveReport",
    "SpgOptions",
    "Stacked",
    "TaskSpaceGoalCost",
    "Termination",
    "Trajectory",
    "Transformed",
    "alspg_solve",
    "al_gradient",
    "al_value",
    "build_oc_problem",
    "closed_loop_ik_step",
    "constrained_ik",
    "equality_block",
    "ilqr_solve",
    "jac_transpose_vec",
    "mpc_loop",
    "reduce_inequalities",
    "robust_ik",
    "rollout",
    "rotated_rectangle_set",
    "spg_minimize",
    "__version__",
]
