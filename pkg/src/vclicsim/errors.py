"""Exception types shared across the simulator."""


class VclicSimError(Exception):
    """Base class for all simulator errors."""


class UnmappedAddress(VclicSimError):
    """MMIO offset not covered by the register map."""


class AccessFault(VclicSimError):
    """Region-level privilege violation (models a PMP / stage-2 fault)."""


class ProtocolError(VclicSimError):
    """A handshake between models was violated; signals a harness bug."""


class InvalidConfig(VclicSimError):
    """Operation is not defined for the given configuration."""


class ValidationError(VclicSimError):
    """Scenario description failed validation.

    ``path`` names the offending field, e.g. ``stimulus[2].line``.
    """

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message
