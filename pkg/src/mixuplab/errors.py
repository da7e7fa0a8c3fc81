"""Exception and warning types shared across the package."""


class MixupLabError(ValueError):
    """Base class for every error raised by mixuplab."""


class DimensionMismatch(MixupLabError):
    pass


class ShapeMismatch(MixupLabError):
    pass


class EmptyDataset(MixupLabError):
    pass


class NonFiniteMoment(MixupLabError):
    """Raised when E[(1-lam)^2 / lam^2] diverges for the requested Beta shapes."""


class NotCentered(MixupLabError):
    pass


class NotInTheta(MixupLabError):
    """The model misclassifies at least one training point with a strict wrong sign."""


class ZeroInput(MixupLabError):
    pass


class EulerIdentityViolated(MixupLabError):
    pass


class InvalidRho(MixupLabError):
    pass


class InvalidDelta(MixupLabError):
    pass


class DegenerateData(MixupLabError):
    pass


class InvalidCount(MixupLabError):
    pass


class InvalidFraction(MixupLabError):
    pass


class MalformedRow(MixupLabError):
    pass


class ConfigError(MixupLabError):
    pass


class ActivationBoundary(UserWarning):
    """Some pre-activation is exactly zero; the subgradient 1{z > 0} was used."""


class ZeroParameter(UserWarning):
    """theta = 0, so the loss does not depend on the input."""
