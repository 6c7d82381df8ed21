"""Exception hierarchy for the band-structure pipeline."""


class BandError(Exception):
    """Base class for every error raised by :mod:`qhjbands`."""


class DomainError(BandError, ValueError):
    """Input outside the physical domain (E <= 0, bad lattice, bad range)."""


class GridError(BandError, ValueError):
    """Sampling grid unusable for finite differencing."""


class ConstantError(BandError, ValueError):
    """Integration constants violate ``mu != 0``."""


class DegenerateError(BandError):
    """Interface matching cannot be solved with the target basis."""


class PoleError(BandError, ZeroDivisionError):
    """Moebius map evaluated at (or next to) its pole."""


class GammaDegenerateError(BandError, ValueError):
    """Superposition with |alpha| == |beta|, for which the arctan form collapses."""


class TanPoleError(BandError, ArithmeticError):
    """A tangent in the interface quantities sits on its pole."""


class NoConvergenceError(BandError, RuntimeError):
    """Multi-start solve for the Bloch constants did not converge."""

    def __init__(self, message, attempts=()):
        super().__init__(message)
        self.attempts = list(attempts)


class ForbiddenEnergyError(BandError, ValueError):
    """Energy lies in a gap: no real Bloch wavenumber."""
