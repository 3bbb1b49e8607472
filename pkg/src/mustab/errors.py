"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes, so keep the hierarchy flat and the
constructors cheap.
"""


class MustabError(Exception):
    """Base class for all package errors."""


class ConfigurationError(MustabError):
    """Bad user input: unknown surface, malformed config, invalid resolution."""


class DegenerateImmersionError(MustabError):
    """The immersion loses rank / the area element vanishes at some node."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class FrameConstructionError(MustabError):
    """Gram-Schmidt candidate degenerated; a different seed order may help."""


class NonFlatBundleError(MustabError):
    """Parallel transport around the disc center is path dependent."""

    def __init__(self, message, holonomy_defect=None):
        super().__init__(message)
        self.holonomy_defect = holonomy_defect


class PreconditionError(MustabError):
    """An operation was invoked outside its domain of validity."""


class WeightError(MustabError):
    """The weight function is nonpositive somewhere on the patch image."""


class OracleError(MustabError):
    """The finite-difference variation oracle could not be evaluated."""
