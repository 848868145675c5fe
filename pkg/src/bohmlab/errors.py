"""Exception hierarchy shared by all modules."""


class BohmlabError(Exception):
    """Base class for all errors raised by the package."""


class InvalidStateError(BohmlabError, ValueError):
    """A wave function or field holds non-finite or otherwise unusable values."""


class DegenerateStateError(BohmlabError, ValueError):
    """The density vanishes on the whole grid."""


class DomainEscapeError(BohmlabError, RuntimeError):
    """Too much mass reached the edge of the periodic box."""


class InstabilityError(BohmlabError, RuntimeError):
    """A time integrator produced NaN or inf."""


class SupportError(BohmlabError, ValueError):
    """A test function or packet is not supported inside the admissible window."""


class ConfigError(BohmlabError, ValueError):
    """An experiment configuration failed validation."""


class ConvergenceError(BohmlabError, RuntimeError):
    """An epsilon sequence could not be extrapolated."""
