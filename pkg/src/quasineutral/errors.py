"""Exception hierarchy. Every error raised on purpose derives from
:class:`QuasineutralError` so callers can catch the package's failures in one
clause while still telling the kinds apart."""


class QuasineutralError(Exception):
    pass


class NoEquilibriumError(QuasineutralError, ValueError):
    """The potential cannot confine the requested mass."""


class UnsupportedEquilibriumError(QuasineutralError, ValueError):
    """The equilibrium exists but falls outside the constructive classes
    (for instance a density that vanishes inside the support)."""


class InternalInconsistencyError(QuasineutralError, RuntimeError):
    """A postcondition that holds in exact arithmetic failed numerically."""


class PreconditionError(QuasineutralError, ValueError):
    pass


class ConfigurationError(QuasineutralError, ValueError):
    pass


class ParticleOutOfBoxError(QuasineutralError, RuntimeError):
    """A particle left the field grid."""
