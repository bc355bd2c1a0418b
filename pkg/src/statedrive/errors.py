"""Exception hierarchy.

Every numerical failure raised by the package derives from
:class:`StateDriveError`, so callers (the CLI in particular) can map
failures to an exit code without catching unrelated exceptions.
"""


class StateDriveError(Exception):
    """Base class for all package errors."""


class ShapeError(StateDriveError, ValueError):
    """Operands have incompatible dimension or grid geometry."""


class DegeneratePairError(StateDriveError, ValueError):
    """Two states are parallel, so no unique orthogonal partner exists."""


class NonUnitaryTrajectoryError(StateDriveError):
    """A trajectory does not conserve its norm (Berry connection not real)."""


class GaugeResidualError(StateDriveError):
    """The parallel-transport condition is violated beyond tolerance."""

    def __init__(self, message, max_residual=None):
        super().__init__(message)
        self.max_residual = max_residual


class ConsistencyError(StateDriveError):
    """Two independent routes to the same quantity disagree."""


class CompletenessError(StateDriveError, ValueError):
    """An eigenbasis has fewer vectors than the Hilbert-space dimension."""


class OrthonormalityDriftError(StateDriveError):
    """A supplied basis has drifted away from orthonormality."""


class NotAnEigenpathError(StateDriveError):
    """A trajectory is not an instantaneous eigenvector of the given Hamiltonian."""


class BudgetError(StateDriveError, ValueError):
    """A resource budget is non-positive somewhere on the path."""


class RangeError(StateDriveError, ValueError):
    """A query lies outside the tabulated range."""


class IntegratorFailureError(StateDriveError):
    """Propagation lost unitarity; a smaller time step is needed."""

    def __init__(self, message, suggested_dt=None):
        super().__init__(message)
        self.suggested_dt = suggested_dt


class GeometryError(StateDriveError, ValueError):
    """A wavepacket does not fit inside its spatial grid."""


class NodeError(StateDriveError):
    """The amplitude vanishes inside the region used for polar decomposition."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class AccuracyWarning(UserWarning):
    """A derivative was taken with a lower-order stencil near a domain edge."""
