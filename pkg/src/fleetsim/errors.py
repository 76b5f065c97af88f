"""Error taxonomy shared by all fleet components."""


class FleetError(Exception):
    """Base class for every error raised by this package."""


class TypeMismatch(FleetError):
    """A topic or interface was used with a conflicting message type."""


class LinkDown(FleetError):
    """The transport underneath a publication is closed."""


class MasterDown(FleetError):
    """A registry operation was attempted while the master is not alive."""


class NameConflict(FleetError):
    """A fully-qualified node or tag name is already taken."""


class InvalidRelay(FleetError):
    """Relay source and destination would form a loop."""


class AuthFailed(FleetError):
    """Cloud handshake credentials were rejected."""


class AlreadyConnected(FleetError):
    """A robot with this id already holds a live cloud endpoint."""


class UnknownBehavior(FleetError):
    """The (pkg, exe) pair is not present in the behavior registry."""


class InvalidConnection(FleetError):
    """A connection references an undeclared or incompatible interface."""


class InvalidCell(FleetError):
    """A cell id is outside the grid."""


class OccupiedCell(FleetError):
    """The cell is currently occupied by a robot and cannot be blocked."""


class InvalidGoal(FleetError):
    """The requested goal cell cannot be assigned."""


class PathRejected(FleetError):
    """A received path does not start at the robot's current cell."""


class ConfigError(FleetError):
    """A scenario or cloud configuration file failed validation."""


class StartupError(FleetError):
    """A server could not be brought up (typically a port conflict)."""


class ConnectFailed(FleetError):
    """A client exhausted its connection retries."""
