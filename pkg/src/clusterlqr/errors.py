"""Exception types shared across the package."""


class ClusterLqrError(Exception):
    """Base class for all package-specific errors."""


class ArgumentError(ClusterLqrError, ValueError):
    """Invalid argument values or inconsistent dimensions."""


class DegenerateWeightError(ArgumentError):
    """A projection weight block is zero (or an entry required nonzero is zero)."""


class GenerationError(ClusterLqrError, RuntimeError):
    """Random instance generation failed (e.g. connectivity never achieved)."""


class NumericalError(ClusterLqrError, RuntimeError):
    """A numerical computation failed or produced an untrustworthy result."""


class NoStabilizingSolutionError(NumericalError):
    """The Riccati equation has no stabilizing solution (imaginary-axis Hamiltonian eigenvalues)."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge within its budget."""


class SpectralGapError(NumericalError):
    """An eigenvalue was detected on (or too close to) the imaginary axis."""


class InstabilityError(ClusterLqrError, RuntimeError):
    """An operation requiring a Hurwitz matrix received an unstable one."""


class InvalidCertificateError(ArgumentError):
    """A user-supplied Lyapunov certificate does not satisfy its defining inequality."""


class IterationFaultError(NumericalError):
    """An iteration violated a contract of the method (e.g. monotone objective)."""


class SynthesisError(ClusterLqrError, RuntimeError):
    """Controller synthesis failed even after the regularizing shift."""


class AssumptionViolationError(ArgumentError):
    """A projection weight fails the unstable-mode screening and was rejected."""


class ConfigError(ClusterLqrError, ValueError):
    """An experiment configuration is malformed or references missing files."""
