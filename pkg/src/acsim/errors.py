class AcsimError(Exception):
    pass


class ConfigError(AcsimError, ValueError):
    """Bad scheme/config input: unknown names, arity or sort mismatches."""


class InvariantBreach(AcsimError, RuntimeError):
    """A runtime invariant was violated; the run must abort."""


class ImmutabilityViolation(InvariantBreach):
    """An auxiliary-machine command changed the base scheme's state."""


class InfiniteCycleError(InvariantBreach):
    """An actor machine chained immediate transitions back into a visited state."""


class BoundTooLarge(AcsimError):
    """Bounded exploration exceeded its state budget."""
