"""Exception and warning types shared by all modules."""


class ArtifactError(Exception):
    """Base class for every error raised by the package."""


# potentials
class ClassificationError(ArtifactError):
    """The potential does not fit any of the three repulsive classes."""


class NotRepulsive(ClassificationError):
    """A sample violates q > 0 or q' < 0."""


class DecayMismatch(ClassificationError):
    """The fitted decay exponent disagrees with the declared one."""


class DomainError(ArtifactError, ValueError):
    """Evaluation point outside the domain of the potential."""


class DivergentTail(ArtifactError):
    """A requested tail integral of q**j does not converge."""


# transforms
class GridMismatch(ArtifactError, ValueError):
    """Operands live on different grids."""


# spectral
class StiffnessFailure(ArtifactError):
    """The adaptive integrator could not advance."""

    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class OrderTooLow(ArtifactError):
    """Truncation order N does not satisfy N * beta >= 1."""


class FitDegenerate(ArtifactError):
    """Far-field fit residual is too large compared with |A|."""


class BandTruncation(ArtifactError):
    """Too much of the data lies outside the tabulated frequency band."""


# evolution
class CFLViolation(ArtifactError):
    """Time step too large for the explicit scheme."""


class Blowup(ArtifactError):
    """Energy grew by more than the allowed factor."""


class RegionOutsideHistory(ArtifactError):
    """The requested flux region was not recorded during the run."""


# modified_propagator
class VariantInadmissible(UserWarning):
    """Phase-shift variant used outside its admissible decay range."""


class PotentialsDifferFar(ArtifactError):
    """Two potentials that should agree far out do not."""


class UnderResolved(ArtifactError):
    """Frequency quadrature too coarse for the requested (x, t)."""


# highdim
class NonConvergentFit(ArtifactError):
    """Fitted asymptotic constants failed to stabilise."""


class Q1Bounded(UserWarning):
    """The first moment stays bounded, so no radial spreading is expected."""


# cli
class ConfigInvalid(ArtifactError):
    """Malformed or inconsistent experiment configuration."""
