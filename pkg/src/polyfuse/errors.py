"""Exception hierarchy shared across the toolkit."""


class PolyfuseError(Exception):
    """Base class for all toolkit errors."""


class NonPositiveDepth(PolyfuseError):
    """Depth value z <= 0 where a positive depth is required."""


class BehindCamera(PolyfuseError):
    """Transformed point has non-positive depth in the target camera."""


class DegenerateRotation(PolyfuseError):
    """Rotation angle too close to pi for unambiguous halving."""


class DegenerateBaseline(PolyfuseError):
    """Stereo baseline length is (numerically) zero."""


class DimensionMismatch(PolyfuseError):
    """Input arrays/images do not share the required dimensions."""


class InvalidRange(PolyfuseError):
    """A [min, max] range with min > max."""


class OddDimensions(PolyfuseError):
    """Mosaic dimensions are not divisible by 2."""


class TotalInternalReflection(PolyfuseError):
    """Snell's law has no real refraction angle."""


class ZeroReflectance(PolyfuseError):
    """Both s and p reflectances vanish; DoLP of the reflected beam undefined."""


class ThetaOutOfFov(PolyfuseError):
    """Field angle outside the lens vertical field of view."""


class OutsideAnnulus(PolyfuseError):
    """Pixel does not lie inside the annular image region."""


class OutOfBounds(PolyfuseError):
    """Continuous pixel coordinate outside the image bounds."""


class InvalidThreshold(PolyfuseError):
    """Threshold outside its admissible interval."""


class EmptyScene(PolyfuseError):
    """Scene specification contains no renderable patches."""


class CalibrationError(PolyfuseError):
    """Calibration file is inconsistent or malformed."""
