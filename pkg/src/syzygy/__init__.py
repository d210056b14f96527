"""Planar three-body toolkit for syzygies and generalised syzygies."""

from .conley import build_matrices, energy_bounds, identity_residuals, sigma_constant
from .errors import (
    CollisionApproach,
    CollisionInput,
    Degenerate,
    HypothesisNotMet,
    NoSignChange,
    NotASyzygy,
    NotNegativeEnergy,
    NotPeriodic,
    OutOfRange,
    SamplerExhausted,
    ScenarioError,
    SyzygyError,
    WindowInvalid,
)
from .events import Event, EventKind, antisymmetry_indicator, classify_middle_body, scan_events
from .integrator import DenseTrajectory, IntegratorConfig, Status, integrate
from .orbits import InitialCondition, euler_circular, figure_eight, lagrange_circular, random_ic
from .state import BodyState, Masses, reduce_to_barycentric
from .theorems import (
    Outcome,
    TheoremReport,
    find_theta,
    minF_oracle,
    sturm_diagnostic,
    theta_rigidity_check,
    trajectory_identity_checks,
    verify_theorem1,
    verify_theorem2_periodic,
    verify_theorem3,
)

__version__ = "0.1.0"
