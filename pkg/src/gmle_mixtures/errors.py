"""Exception hierarchy for gmle-mixtures.

Library code raises these; only the command-line front end turns them into
exit codes.
"""

from __future__ import annotations


class GmleError(Exception):
    """Base class for every error raised by this package."""


class InvalidMixing(GmleError, ValueError):
    """A mixing distribution violates its invariants."""


class InvalidSupport(GmleError, ValueError):
    """A support specification is malformed."""


class UndefinedPosterior(GmleError, ValueError):
    """The posterior mean is requested where the mixture has no mass."""


class Indeterminate(GmleError):
    """The pairwise GMLE comparison is 0/0 at some observation."""


class NoObservations(GmleError, ValueError):
    """A sample is empty."""


class UnboundedProblem(GmleError):
    """EM was requested where point masses at arbitrary locations make the likelihood unbounded."""


class EmptyResponsibility(GmleError):
    """An EM step has no out-of-support observations to work on."""


class NoInteriorRoot(GmleError, ValueError):
    """The boundary fixed-point equation has no root inside (0, c)."""


class QuadratureFailure(GmleError):
    """Numerical integration did not reach the requested tolerance."""


class ScaleOutOfRange(GmleError, ValueError):
    """An atom scale lies outside the interval a construction requires."""


class ZeroTruncationMass(GmleError, ValueError):
    """The mixture puts no mass on the positive half-line."""
