"""Exception and warning types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the valid domain of a curve or surface."""


class GeometryError(ValueError):
    """Invalid geometric construction (degrees, knot vectors, control nets)."""


class TopologyError(ValueError):
    """Invalid boundary-structure data (references, loops, manifoldness)."""


class FormatError(ValueError):
    """Malformed serialized data (JSON model, token file, weight file)."""


class ShapeMismatchError(ValueError):
    """Tensor or parameter shapes disagree; the message carries both."""


class OrientationWarning(UserWarning):
    """A trim loop had the wrong winding direction and was auto-corrected."""


class DegenerateLoopWarning(UserWarning):
    """A trim loop with negligible area was ignored."""


class LoopCrossingWarning(UserWarning):
    """Sampled trim-loop polylines cross each other (best-effort check)."""


class RankDeficientWarning(UserWarning):
    """An unregularized fit was rank deficient; minimum-norm solution used."""


class ConfigHashWarning(UserWarning):
    """A weight file was produced under a different embedding configuration."""
