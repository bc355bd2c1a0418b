"""Hamiltonians that drive prescribed quantum state trajectories.

Given a path of states, :mod:`statedrive` fixes its U(1) gauge, finds the
fastest traversal allowed by an energy-uncertainty budget, builds the
Hamiltonian that carries the state along it, and verifies the result by
propagation.  Fixed-endpoint speed limits, counterdiabatic driving,
mixed-state paths and a local-potential test for 1-d wavefunctions are
included.
"""

__version__ = "0.1.0"

from .driving import (
    DensityTrajectory,
    HamiltonianSchedule,
    Rank2Kernel,
    ResourceBudget,
    accessible,
    brachistochrone_hamiltonian,
    brachistochrone_time,
    counterdiabatic_control,
    counterdiabatic_hprime,
    diagnostics,
    hprime_schedule,
    mixed_hamiltonian,
    mixed_schedule,
    mixed_variance,
    phase_decomposition,
    trajectory_hamiltonian,
    trajectory_schedule,
)
from .errors import (
    AccuracyWarning,
    BudgetError,
    CompletenessError,
    ConsistencyError,
    DegeneratePairError,
    GaugeResidualError,
    GeometryError,
    IntegratorFailureError,
    NodeError,
    NonUnitaryTrajectoryError,
    NotAnEigenpathError,
    OrthonormalityDriftError,
    RangeError,
    ShapeError,
    StateDriveError,
)
from .evolve import propagate_density, propagate_state
from .gauge import GaugeFixedTrajectory, berry_connection, gauge_fix, gauge_phase
from .qsl import QslReport, continuum_separation_demo, qsl_bounds
from .reparam import ReparamTable, retime, time_of_param, time_of_param_mixed
from .state import (
    Grid,
    GridWavefunction,
    StateTrajectory,
    basis_state,
    fidelity,
    gram_schmidt_partner,
    inner,
    norm,
    normalize,
)
