"""Exception types raised by rgbtfuse."""


class ShapeError(ValueError):
    """Array shapes or channel counts are incompatible."""


class NonSmoothPointError(ValueError):
    """A gradient was requested at a point where the function has a kink."""


class EmptyRegionError(ValueError):
    """A crop region does not intersect the feature grid."""


class DegenerateSceneError(ValueError):
    """The alignment objective is flat, so no shift can be recovered."""


class PlacementError(RuntimeError):
    """Objects could not be placed without overlap."""


class ConfigError(ValueError):
    """A configuration file has unknown or invalid keys."""
