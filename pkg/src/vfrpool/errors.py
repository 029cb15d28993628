"""Exception hierarchy. Every domain error derives from ``VfrPoolError``."""


class VfrPoolError(ValueError):
    pass


class MalformedHeader(VfrPoolError):
    pass


class UnsupportedEncoding(VfrPoolError):
    pass


class EmptyAudio(VfrPoolError):
    pass


class AudioTooShort(VfrPoolError):
    pass


class DimensionMismatch(VfrPoolError):
    pass


class ShapeMismatch(VfrPoolError):
    pass


class EmptyCurve(VfrPoolError):
    pass


class UnknownVariant(VfrPoolError):
    pass


class WeightNotNormalized(VfrPoolError):
    pass


class AllZeroConditioning(VfrPoolError):
    pass


class InvalidConfig(VfrPoolError):
    pass


class UtteranceTooShort(VfrPoolError):
    pass


class LabelOutOfRange(VfrPoolError):
    pass


class EmptyDataset(VfrPoolError):
    pass


class ZeroVector(VfrPoolError):
    pass


class DegenerateTrials(VfrPoolError):
    pass


class LengthMismatch(VfrPoolError):
    pass


class MalformedFile(VfrPoolError):
    """Binary archive or text file that does not follow its format."""
