"""Exception types raised across the package."""


class CondPrepError(Exception):
    """Base class for all package errors."""


class RegistryError(CondPrepError, ValueError):
    """Invalid, unknown or colliding optical mode labels."""


class CapError(CondPrepError, ValueError):
    """A state exceeds its per-mode or total photon cap."""

    def __init__(self, message, photons=None):
        super().__init__(message)
        self.photons = photons


class SupportError(CondPrepError, ValueError):
    """A gate was applied to a state outside the subspace it is defined on."""


class DesignError(CondPrepError, ValueError):
    """The inverse-design recurrences cannot be solved (zero seed or coefficient)."""


class SpecError(CondPrepError, ValueError):
    """Malformed or inconsistent target description."""


class PlanError(CondPrepError, RuntimeError):
    """A plan cannot be built or simulated, or failed its internal consistency checks."""
