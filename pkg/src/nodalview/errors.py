"""Exception hierarchy.

Every failure raised by the library derives from :class:`NodalViewError` so
callers (and the CLI) can catch the whole family in one place.
"""


class NodalViewError(ValueError):
    pass


# geometry
class ParallelRay(NodalViewError):
    pass


class BehindOrigin(NodalViewError):
    pass


class OffPlane(NodalViewError):
    pass


# ocular model
class TargetBehindEyes(NodalViewError):
    pass


class TargetAtEyeCenter(NodalViewError):
    pass


class NegativeVergence(NodalViewError):
    pass


# display optics
class NotAMagnifier(NodalViewError):
    pass


class DegenerateLens(NodalViewError):
    pass


class InvalidTarget(NodalViewError):
    pass


# rendering
class PointBehindEye(NodalViewError):
    pass


class EyeOnWindowPlane(NodalViewError):
    pass


# metrics
class DegenerateTrajectory(NodalViewError):
    pass


class MetricError(NodalViewError):
    """Wraps a failure with the id of the metric that raised it."""

    def __init__(self, metric_id, cause):
        super().__init__(f"{metric_id}: {type(cause).__name__}: {cause}")
        self.metric_id = metric_id
        self.cause = cause


# scenarios
class ScenarioError(NodalViewError):
    pass


class ParseError(ScenarioError):
    pass


class ValidationError(ScenarioError):
    pass


class UnknownParameter(ScenarioError):
    pass


class EmptyRange(ScenarioError):
    pass
