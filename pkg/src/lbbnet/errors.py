"""Exception types raised across the package."""


class LbbError(Exception):
    """Base class for all package errors."""


class UserInsideBuilding(LbbError, ValueError):
    pass


class SceneFull(LbbError, ValueError):
    pass


class SceneError(LbbError, ValueError):
    """Invalid scene description."""


class FormatError(LbbError, ValueError):
    """Bad magic, unknown version or malformed header."""


class DimensionMismatch(LbbError, ValueError):
    """Header dimensions disagree with the payload."""


class RowCountMismatch(LbbError, ValueError):
    pass


class ZeroNormChannel(LbbError, ValueError):
    """A channel with zero norm was given where the correlation is undefined."""


class EmptyTrainingSet(LbbError, ValueError):
    pass


class DegenerateGeometry(LbbError, ValueError):
    pass
