"""Manifold-aware nonlinear MPC motion planning over SE(2).

Transcribes continuous-time optimal control problems into sparse hypergraph
NLPs using nonlinear increment/difference operators, solves them with an
augmented-Lagrangian Levenberg-Marquardt solver, and runs closed-loop MPC
simulations (receding-horizon quadratic form and shrinking-horizon
time-optimal control with online grid adaptation).
"""

from .manifold import (
    ManifoldTag,
    SE2State,
    StateIncrement,
    SE2_MASK,
    SE2_TAGS,
    boxminus,
    boxplus,
    generic_boxminus,
    generic_boxplus,
    interpolate,
    norm_angle,
)
from .dynamics import (
    BicycleParams,
    ControlBounds,
    SystemModel,
    bicycle_model,
    diff_drive_model,
    make_model,
    plant_integrate,
)
from .geometry import (
    Disc,
    MovingStadiumObstacle,
    PointObstacle,
    SegmentObstacle,
    Stadium,
    min_distance,
    signed_clearance,
)
from .transcription import (
    BoundaryData,
    CollocationKernel,
    GridMode,
    HypergraphProblem,
    TrajectoryGrid,
    assemble_nlp,
    defect,
    extract_grid,
    initialize_guess,
)
from .solver import SolverConfig, SolverResult, SolverStatus, solve
from .controller import (
    QuadraticFormConfig,
    QuadraticFormController,
    TimeOptimalConfig,
    TimeOptimalController,
    grid_adapt,
    make_controller,
)
from .simulation import ClosedLoopTrace, Metrics, compute_metrics, run_closed_loop
from .scenarios import Scenario, diff_drive_scenario, get_scenario, parking_scenario

__version__ = "0.1.0"

__all__ = [
    "ManifoldTag",
    "SE2State",
    "StateIncrement",
    "SE2_MASK",
    "SE2_TAGS",
    "boxminus",
    "boxplus",
    "generic_boxminus",
    "generic_boxplus",
    "interpolate",
    "norm_angle",
    "BicycleParams",
    "ControlBounds",
    "SystemModel",
    "bicycle_model",
    "diff_drive_model",
    "make_model",
    "plant_integrate",
    "Disc",
    "MovingStadiumObstacle",
    "PointObstacle",
    "SegmentObstacle",
    "Stadium",
    "min_distance",
    "signed_clearance",
    "BoundaryData",
    "CollocationKernel",
    "GridMode",
    "HypergraphProblem",
    "TrajectoryGrid",
    "assemble_nlp",
    "defect",
    "extract_grid",
    "initialize_guess",
    "SolverConfig",
    "SolverResult",
    "SolverStatus",
    "solve",
    "QuadraticFormConfig",
    "QuadraticFormController",
    "TimeOptimalConfig",
    "TimeOptimalController",
    "grid_adapt",
    "make_controller",
    "ClosedLoopTrace",
    "Metrics",
    "compute_metrics",
    "run_closed_loop",
    "Scenario",
    "diff_drive_scenario",
    "get_scenario",
    "parking_scenario",
]
