"""Exception types shared across the package."""


class WeierMNVError(Exception):
    """Base class for all package errors."""


class NonPositiveImaginaryModulus(WeierMNVError):
    """Lattice modulus tau must satisfy Im(tau) > 0."""


class BadResolution(WeierMNVError):
    """Grid resolutions must be even integers >= 4."""


class NonZeroMeanInput(WeierMNVError):
    """Antiderivative requested for a field with a non-negligible mean."""


class DegenerateProfile(WeierMNVError):
    """Profile curve touches the rotation axis or has vanishing arc length."""


class DegenerateImmersion(WeierMNVError):
    """First fundamental form is singular somewhere on the grid."""


class NotConformal(WeierMNVError):
    """Immersion is not given in conformal coordinates (residual too large)."""


class NonRealPotential(WeierMNVError):
    """Dirac potential has a non-negligible imaginary part."""


class BranchInconsistency(WeierMNVError):
    """Square-root branch transport around a cycle does not close to +-1."""


class NonPeriodicImage(WeierMNVError):
    """Weierstrass integrands carry a nonzero period vector; image is not a torus."""

    def __init__(self, message, period_vectors=None):
        super().__init__(message)
        self.period_vectors = period_vectors


class DiracResidualTooLarge(WeierMNVError):
    """Spinor does not solve the Dirac equation to the required accuracy."""


class CenterOnSurface(WeierMNVError):
    """Inversion center is too close to (or on) the immersed surface."""


class IntegrationFailure(WeierMNVError):
    """ODE integrator failed to traverse the requested interval."""


class TruncationTooSmall(WeierMNVError):
    """Fourier truncation cannot resolve the requested Bloch point."""


class BlowupDetected(WeierMNVError):
    """Flow amplitude grew by more than the allowed factor within one step."""


class NoConservingCandidate(WeierMNVError):
    """No coefficient candidate conserves the cubic functional to tolerance."""


class ResolutionWarning(UserWarning):
    """Spectral tail of a computed field suggests the grid is under-resolved."""
