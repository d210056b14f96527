"""Exception hierarchy shared by every module."""


class SyzygyError(Exception):
    """Base class for all errors raised by this package."""


class CollisionInput(SyzygyError):
    """Two bodies occupy the same position."""


class CollisionApproach(SyzygyError):
    """A pairwise distance dropped below the collision threshold."""


class NotNegativeEnergy(SyzygyError):
    """The total energy is not strictly negative."""


class OutOfRange(SyzygyError):
    """Requested time lies outside a trajectory's span."""


class NoSignChange(SyzygyError):
    """A root bracket does not contain a sign change."""


class NotASyzygy(SyzygyError):
    """The configuration is not collinear."""


class Degenerate(SyzygyError):
    """Geometry is too degenerate to classify (coincident projections)."""


class HypothesisNotMet(SyzygyError):
    """Initial data do not satisfy a theorem's hypotheses."""


class NotPeriodic(SyzygyError):
    """A trajectory fails the periodicity test."""


class WindowInvalid(SyzygyError):
    """A window passed to the Sturm diagnostic contains a zero of Delta1."""


class SamplerExhausted(SyzygyError):
    """Rejection sampling ran out of budget."""


class ScenarioError(SyzygyError):
    """A scenario file failed to parse or validate."""
