"""Exception types shared across the package."""


class CommdynError(Exception):
    """Base class for all commdyn errors."""


class NotSymmetric(CommdynError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""


class DomainError(CommdynError):
    """Value outside the invertible range of a saturation function."""

    def __init__(self, message, pair=None, agent=None):
        super().__init__(message)
        self.pair = pair
        self.agent = agent


class SingularJacobian(CommdynError):
    """Newton linear solve failed; typically means a near-bifurcation point."""


class InvalidRegime(CommdynError):
    """Bifurcation threshold undefined (nonpositive denominator)."""


class NeutralState(CommdynError):
    """Equilibrium is (numerically) the origin and carries no structure."""


class LengthMismatch(CommdynError):
    """Label vectors of different lengths."""


class EmptyInput(CommdynError):
    """No records to aggregate."""


class ZeroGap(CommdynError):
    """Spectral gap of the expected matrix is zero; perturbation bound undefined."""
