"""Keyframe-based hop trajectories for a hopping multirotor.

Rigid-body dynamics with drag, a differential-flatness map with drag
compensation, piecewise-polynomial hop trajectories with null-space shaping,
a Lyapunov tracking controller, the hop cycle (touchdown, stance, touchdown
angle adaptation) and a scenario simulator.
"""

from .controller import Gains, compute_errors, control, control_laws, exact_laws, lyapunov_rate
from .dynamics import (
    euler_to_rotation,
    input_mixing,
    integrate,
    integrate_step,
    inverse_mixing,
    make_state,
    mixing_matrix,
    rotation_to_euler,
    saturate_input,
    state_derivative,
)
from .errors import (
    ConditioningError,
    ConstraintPatternError,
    ContactError,
    DomainError,
    HopTrajError,
    InfeasibleTrajectoryError,
    SingularityError,
)
from .flatness import FlatSample, FlatState, body_rates, flat_heading, flat_to_state, thrust_attitude
from .hop_cycle import GammaAdapter, StanceModel, Surface, apply_gamma, detect_touchdown, stance_map, update_gamma
from .params import RobotParams, load_params, nominal_params
from .sim import Scenario, TrajectoryLog, compare_drag, emit_csv, load_scenario, read_csv, rmse, run_scenario
from .trajectory import (
    ExtraConstraint,
    Keyframe,
    PolynomialTrajectory,
    TouchdownSpec,
    TrajectoryType,
    make_hop_trajectory,
    make_keyframes,
    solve_trajectory,
)

__version__ = "0.1.0"
